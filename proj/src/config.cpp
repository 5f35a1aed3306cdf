#include "betaunc/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "betaunc/binary_io.hpp"
#include "betaunc/errors.hpp"
#include "betaunc/network.hpp"

namespace betaunc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* b = value.data();
    const char* e = b + value.size();
    const auto res = std::from_chars(b, e, out);
    if (res.ec != std::errc() || res.ptr != e) {
        throw UsageError("config key '" + key + "': cannot parse '" + value + "' as a number");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    const double v = parse_number<double>(key, value);
    if (!std::isfinite(v)) throw UsageError("config key '" + key + "' must be finite");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw UsageError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw UsageError("config: " + msg);
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "arch_preset") c.arch_preset = value;
    else if (key == "crop_len") c.crop_len = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_real(key, value);
    else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
    else if (key == "steps_per_epoch") c.steps_per_epoch = parse_number<std::size_t>(key, value);
    else if (key == "patience") c.patience = parse_number<std::size_t>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "label_eps") c.label_eps = parse_real(key, value);
    else if (key == "resample_min") c.resample_min = parse_real(key, value);
    else if (key == "resample_max") c.resample_max = parse_real(key, value);
    else if (key == "augment") c.augment = parse_bool(key, value);
    else if (key == "keep_fraction") c.keep_fraction = parse_real(key, value);
    else if (key == "decision_threshold") c.decision_threshold = parse_real(key, value);
    else if (key == "bn_momentum") c.bn_momentum = parse_real(key, value);
    else if (key == "bn_eps") c.bn_eps = parse_real(key, value);
    else if (key == "adam_beta1") c.adam_beta1 = parse_real(key, value);
    else if (key == "adam_beta2") c.adam_beta2 = parse_real(key, value);
    else if (key == "adam_eps") c.adam_eps = parse_real(key, value);
    else if (key == "sampling") {
        if (value == "balanced") c.sampling = Sampling::Balanced;
        else if (value == "changepoint") c.sampling = Sampling::Changepoint;
        else throw UsageError("config key 'sampling' must be 'balanced' or 'changepoint'");
    } else {
        throw UsageError("unknown config key '" + key + "'");
    }
}

void validate(const RunConfig& c) {
    (void)ArchitectureSpec::from_preset(c.arch_preset);
    (void)c.effective_crop_len();
    require(c.batch_size > 0 && c.batch_size % 2 == 0, "batch_size must be a positive even number");
    require(c.learning_rate >= 0.0, "learning_rate must be >= 0");
    require(c.label_eps > 0.0 && c.label_eps < 0.5, "label_eps must be in (0, 0.5)");
    require(c.resample_min > 0.0 && c.resample_min <= c.resample_max, "need 0 < resample_min <= resample_max");
    require(c.keep_fraction > 0.0 && c.keep_fraction <= 1.0, "keep_fraction must be in (0, 1]");
    require(c.decision_threshold >= 0.0 && c.decision_threshold <= 1.0, "decision_threshold must be in [0, 1]");
    require(c.bn_momentum > 0.0 && c.bn_momentum < 1.0, "bn_momentum must be in (0, 1)");
    require(c.bn_eps > 0.0, "bn_eps must be positive");
    require(c.adam_beta1 > 0.0 && c.adam_beta1 < 1.0, "adam_beta1 must be in (0, 1)");
    require(c.adam_beta2 > 0.0 && c.adam_beta2 < 1.0, "adam_beta2 must be in (0, 1)");
    require(c.adam_eps > 0.0, "adam_eps must be positive");
}

}  // namespace

std::size_t RunConfig::effective_crop_len() const {
    const std::size_t preset_len = ArchitectureSpec::from_preset(arch_preset).input_length;
    if (crop_len && *crop_len != preset_len) {
        throw UsageError("crop_len " + std::to_string(*crop_len) + " does not match the '" + arch_preset +
                         "' input length " + std::to_string(preset_len));
    }
    return preset_len;
}

std::map<std::string, std::string> RunConfig::echo() const {
    return {
        {"arch_preset", arch_preset},
        {"crop_len", std::to_string(effective_crop_len())},
        {"batch_size", std::to_string(batch_size)},
        {"learning_rate", fmt(learning_rate)},
        {"epochs", std::to_string(epochs)},
        {"steps_per_epoch", std::to_string(steps_per_epoch)},
        {"patience", std::to_string(patience)},
        {"seed", std::to_string(seed)},
        {"label_eps", fmt(label_eps)},
        {"resample_min", fmt(resample_min)},
        {"resample_max", fmt(resample_max)},
        {"augment", augment ? "true" : "false"},
        {"keep_fraction", fmt(keep_fraction)},
        {"decision_threshold", fmt(decision_threshold)},
        {"bn_momentum", fmt(bn_momentum)},
        {"bn_eps", fmt(bn_eps)},
        {"adam_beta1", fmt(adam_beta1)},
        {"adam_beta2", fmt(adam_beta2)},
        {"adam_eps", fmt(adam_eps)},
        {"sampling", sampling == Sampling::Balanced ? "balanced" : "changepoint"},
    };
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : echo()) out += k + " = " + v + "\n";
    return out;
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (seen.count(key)) {
            throw UsageError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        seen[key] = line_no;
        set_key(c, key, value);
    }
    validate(c);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const DataError&) {
        throw UsageError("cannot read config file '" + path.string() + "'");
    }
    return parse(std::string(bytes.begin(), bytes.end()));
}

RunConfig RunConfig::from_echo(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [k, v] : kv) set_key(c, k, v);
    validate(c);
    return c;
}

}  // namespace betaunc
