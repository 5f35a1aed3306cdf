#include "betaunc/network.hpp"

#include "betaunc/errors.hpp"
#include "json.hpp"

namespace betaunc {

ArchitectureSpec ArchitectureSpec::paper() {
    ArchitectureSpec s;
    s.preset_name = "paper";
    s.input_length = 2048;
    s.stem = {5, 8, 2};
    s.groups = {{2, 8, 3}, {2, 8, 3}, {2, 12, 3}, {2, 12, 3}, {3, 16, 3}, {3, 16, 3}, {2, 20, 3}};
    s.head_outputs = 2;
    return s;
}

ArchitectureSpec ArchitectureSpec::tiny() {
    ArchitectureSpec s;
    s.preset_name = "tiny";
    s.input_length = 256;
    s.stem = {5, 4, 2};
    s.groups = {{1, 4, 3}, {1, 6, 3}};
    s.head_outputs = 2;
    return s;
}

ArchitectureSpec ArchitectureSpec::from_preset(const std::string& name) {
    if (name == "paper") return paper();
    if (name == "tiny") return tiny();
    throw UsageError("unknown architecture preset '" + name + "' (expected 'paper' or 'tiny')");
}

std::vector<std::size_t> ArchitectureSpec::spatial_chain() const {
    std::vector<std::size_t> chain;
    std::size_t len = (input_length - stem.pool) / stem.pool + 1;
    chain.push_back(len);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        len = (len + 1) / 2;
        chain.push_back(len);
    }
    chain.push_back(1);
    return chain;
}

std::string ArchitectureSpec::to_json() const {
    nlohmann::ordered_json j;
    j["preset_name"] = preset_name;
    j["input_length"] = input_length;
    j["stem"] = {{"kernel", stem.kernel}, {"channels", stem.channels}, {"pool", stem.pool}};
    auto groups_json = nlohmann::ordered_json::array();
    for (const auto& g : groups) {
        groups_json.push_back({{"blocks", g.blocks}, {"channels", g.channels}, {"kernel", g.kernel}});
    }
    j["groups"] = std::move(groups_json);
    j["head_outputs"] = head_outputs;
    return j.dump();
}

ArchitectureSpec ArchitectureSpec::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ArchitectureSpec s;
    s.preset_name = j.at("preset_name").get<std::string>();
    s.input_length = j.at("input_length").get<std::size_t>();
    const auto& st = j.at("stem");
    s.stem = {st.at("kernel").get<std::size_t>(), st.at("channels").get<std::size_t>(),
              st.at("pool").get<std::size_t>()};
    for (const auto& g : j.at("groups")) {
        s.groups.push_back(
            {g.at("blocks").get<std::size_t>(), g.at("channels").get<std::size_t>(), g.at("kernel").get<std::size_t>()});
    }
    s.head_outputs = j.at("head_outputs").get<std::size_t>();
    if (s.head_outputs != 2 || s.input_length < s.stem.pool || s.stem.pool == 0) {
        throw UsageError("architecture spec is not a valid beta-head network");
    }
    return s;
}

Model build_model(const std::string& preset, std::uint64_t seed, ModelOptions options) {
    return Model(ArchitectureSpec::from_preset(preset), seed, options);
}

}  // namespace betaunc
