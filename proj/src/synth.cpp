#include "betaunc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "betaunc/errors.hpp"

namespace betaunc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct RhythmModel {
    double normal_rr_mean;
    double af_rr_mean;
    double af_shape;  // gamma shape = 1 / cv^2
};

RhythmModel draw_rhythm(Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    RhythmModel m;
    m.normal_rr_mean = 0.7 + 0.4 * u01(rng);
    m.af_rr_mean = 0.55 + 0.35 * u01(rng);
    const double cv = 0.35 + 0.15 * u01(rng);
    m.af_shape = 1.0 / (cv * cv);
    return m;
}

/// Beat onset times; the rhythm in force at each beat decides the next interval.
template <class TagAt>
std::vector<double> draw_beats(double duration, const RhythmModel& m, TagAt tag_at, Rng& rng) {
    std::vector<double> beats;
    double t = std::uniform_real_distribution<double>(0.05, 0.6)(rng);
    std::normal_distribution<double> normal_rr(m.normal_rr_mean, 0.02);
    std::gamma_distribution<double> af_rr(m.af_shape, m.af_rr_mean / m.af_shape);
    while (t < duration) {
        beats.push_back(t);
        const double rr = tag_at(t) == kTagAf ? std::max(0.25, af_rr(rng)) : std::max(0.3, normal_rr(rng));
        t += rr;
    }
    return beats;
}

class Renderer {
public:
    Renderer(std::size_t n, double fs) : fs_(fs), sig_(n, 0.0) {}

    void gaussian(double center_s, double height, double width_s) {
        const double c = center_s * fs_;
        const double w = width_s * fs_;
        const auto lo = static_cast<std::ptrdiff_t>(std::floor(c - 4.0 * w));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil(c + 4.0 * w));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i <= hi && i < static_cast<std::ptrdiff_t>(sig_.size());
             ++i) {
            const double z = (static_cast<double>(i) - c) / w;
            sig_[static_cast<std::size_t>(i)] += height * std::exp(-0.5 * z * z);
        }
    }

    void beat(double t, double amp, bool p_wave) {
        if (p_wave) gaussian(t - 0.17, 0.15 * amp, 0.022);
        gaussian(t - 0.028, -0.12 * amp, 0.008);
        gaussian(t, amp, 0.010);
        gaussian(t + 0.030, -0.25 * amp, 0.010);
        gaussian(t + 0.25, 0.30 * amp, 0.045);
    }

    std::vector<double>& samples() { return sig_; }
    double fs() const { return fs_; }

private:
    double fs_;
    std::vector<double> sig_;
};

/// Renders one recording given the rhythm tags used for timing and the
/// (possibly different) tags used for waveform morphology.
std::vector<float> render(std::size_t n, double fs, const std::vector<double>& beats,
                          const std::vector<std::uint8_t>& morph, double noise_sd, bool invert, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double amp = 0.7 + 0.8 * u01(rng);
    Renderer r(n, fs);
    for (double t : beats) {
        const auto idx = std::min(n - 1, static_cast<std::size_t>(t * fs));
        r.beat(t, amp, morph[idx] == kTagNormal);
    }
    auto& s = r.samples();

    // fibrillatory waves: wandering frequency and slowly modulated amplitude
    double freq = 5.0 + 4.0 * u01(rng);
    double phase = kTwoPi * u01(rng);
    const double f_amp = (0.15 + 0.1 * u01(rng)) * amp;
    const double mod_freq = 0.1 + 0.3 * u01(rng);
    const double mod_phase = kTwoPi * u01(rng);
    std::normal_distribution<double> jitter(0.0, 0.05);
    for (std::size_t i = 0; i < n; ++i) {
        freq = std::clamp(freq + jitter(rng), 4.0, 9.0);
        phase += kTwoPi * freq / fs;
        if (morph[i] == kTagAf) {
            const double env = 0.7 + 0.3 * std::sin(kTwoPi * mod_freq * static_cast<double>(i) / fs + mod_phase);
            s[i] += f_amp * env * std::sin(phase);
        }
    }

    const double wander_amp = 0.15 * amp * u01(rng);
    const double wander_freq = 0.15 + 0.25 * u01(rng);
    const double wander_phase = kTwoPi * u01(rng);
    std::normal_distribution<double> noise(0.0, noise_sd * amp);
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        double v = s[i] + wander_amp * std::sin(kTwoPi * wander_freq * t + wander_phase) + noise(rng);
        if (invert) v = -v;
        out[i] = static_cast<float>(v);
    }
    return out;
}

std::string make_id(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%04zu", prefix, i);
    return buf;
}

}  // namespace

std::vector<SignalRecord> synth_generate(const SynthOptions& o) {
    if (o.n_per_class == 0) throw UsageError("synth_generate needs at least one record per class");
    if (!(o.min_seconds > 0.0 && o.min_seconds <= o.max_seconds) || !(o.sampling_rate > 0.0)) {
        throw UsageError("synth_generate: invalid duration range or sampling rate");
    }
    Rng rng(o.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<SignalRecord> out;
    out.reserve(2 * o.n_per_class);
    for (std::size_t i = 0; i < o.n_per_class; ++i) {
        for (std::uint8_t cls : {kTagNormal, kTagAf}) {
            const double duration = o.min_seconds + (o.max_seconds - o.min_seconds) * u01(rng);
            const auto n = static_cast<std::size_t>(std::llround(duration * o.sampling_rate));
            const RhythmModel rhythm = draw_rhythm(rng);
            const auto beats = draw_beats(duration, rhythm, [cls](double) { return cls; }, rng);

            const bool atypical = u01(rng) < o.atypical_fraction;
            std::vector<std::uint8_t> morph(n, cls);
            if (atypical) {
                std::size_t pos = 0;
                while (pos < n) {
                    const auto block = static_cast<std::size_t>((2.0 + 3.0 * u01(rng)) * o.sampling_rate);
                    const std::uint8_t tag = u01(rng) < 0.5 ? cls : static_cast<std::uint8_t>(1 - cls);
                    std::fill(morph.begin() + static_cast<std::ptrdiff_t>(pos),
                              morph.begin() + static_cast<std::ptrdiff_t>(std::min(n, pos + block)), tag);
                    pos += block;
                }
            }
            const double noise_sd = atypical ? 0.05 + 0.05 * u01(rng) : 0.01 + 0.02 * u01(rng);
            const bool invert = u01(rng) < o.inverted_fraction;

            SignalRecord rec;
            rec.id = make_id(cls == kTagAf ? 'A' : 'N', i);
            rec.sampling_rate = o.sampling_rate;
            rec.target = cls;
            rec.samples = render(n, o.sampling_rate, beats, morph, noise_sd, invert, rng);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::vector<SignalRecord> synth_generate(std::size_t n_per_class, double max_seconds, std::uint64_t seed) {
    SynthOptions o;
    o.n_per_class = n_per_class;
    o.seed = seed;
    o.max_seconds = max_seconds;
    o.min_seconds = std::min(o.min_seconds, max_seconds);
    return synth_generate(o);
}

std::vector<SignalRecord> synth_generate_changepoints(const ChangepointSynthOptions& o) {
    if (o.n_records == 0) throw UsageError("synth_generate_changepoints needs at least one record");
    if (!(o.min_seconds > 0.0 && o.min_seconds <= o.max_seconds) ||
        !(o.min_interval_seconds > 0.0 && o.min_interval_seconds <= o.max_interval_seconds)) {
        throw UsageError("synth_generate_changepoints: invalid duration ranges");
    }
    Rng rng(o.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<SignalRecord> out;
    for (std::size_t i = 0; i < o.n_records; ++i) {
        const double duration = o.min_seconds + (o.max_seconds - o.min_seconds) * u01(rng);
        const auto n = static_cast<std::size_t>(std::llround(duration * o.sampling_rate));

        RhythmAnnotation ann;
        ann.initial_tag = u01(rng) < 0.5 ? kTagNormal : kTagAf;
        std::uint8_t tag = ann.initial_tag;
        double t = 0.0;
        while (true) {
            t += o.min_interval_seconds + (o.max_interval_seconds - o.min_interval_seconds) * u01(rng);
            const auto idx = static_cast<std::uint64_t>(std::llround(t * o.sampling_rate));
            if (idx >= n) break;
            tag = static_cast<std::uint8_t>(1 - tag);
            ann.changepoints.push_back({idx, tag});
        }

        std::vector<std::uint8_t> morph(n);
        for (std::size_t k = 0; k < n; ++k) morph[k] = ann.tag_at(k);
        const RhythmModel rhythm = draw_rhythm(rng);
        const auto beats = draw_beats(
            duration, rhythm,
            [&](double bt) { return ann.tag_at(static_cast<std::uint64_t>(bt * o.sampling_rate)); }, rng);
        const double noise_sd = 0.01 + 0.02 * u01(rng);
        const bool invert = u01(rng) < 0.3;

        SignalRecord rec;
        rec.id = make_id('C', i);
        rec.sampling_rate = o.sampling_rate;
        rec.samples = render(n, o.sampling_rate, beats, morph, noise_sd, invert, rng);
        const auto af = static_cast<double>(std::count(morph.begin(), morph.end(), kTagAf));
        rec.target = af / static_cast<double>(n);
        rec.annotation = std::move(ann);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace betaunc
