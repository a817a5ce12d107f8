#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aot/numeric.hpp"

#include <json.hpp>

namespace aot {

enum class PreferenceMode { Paired, Unpaired };

struct PairedRecord {
    std::size_t x;
    std::size_t y_plus;
    std::size_t y_minus;
};

struct ItemRecord {
    std::size_t x;
    std::size_t y;
};

struct DatasetMeta {
    std::uint64_t seed = 0;
    double temp = 0.0;
    bool generated = false;  // true when produced by generate()
};

/// Dataset-sized collection of preference records. In Unpaired mode the
/// positive and negative streams are independent (x, y) pair lists.
struct PreferenceDataset {
    PreferenceMode mode = PreferenceMode::Paired;
    std::size_t k = 0;
    std::size_t m = 0;
    std::vector<PairedRecord> paired;
    std::vector<ItemRecord> unpaired_pos;
    std::vector<ItemRecord> unpaired_neg;
    DatasetMeta meta;

    std::size_t size() const {
        return mode == PreferenceMode::Paired ? paired.size()
                                              : std::min(unpaired_pos.size(), unpaired_neg.size());
    }

    /// View a paired dataset as unpaired marginals (chosen stream, rejected
    /// stream). Errors in the other direction: pairs cannot be invented.
    PreferenceDataset as_unpaired() const {
        if (mode == PreferenceMode::Unpaired) return *this;
        PreferenceDataset d;
        d.mode = PreferenceMode::Unpaired;
        d.k = k;
        d.m = m;
        d.meta = meta;
        d.unpaired_pos.reserve(paired.size());
        d.unpaired_neg.reserve(paired.size());
        for (const auto& r : paired) {
            d.unpaired_pos.push_back({r.x, r.y_plus});
            d.unpaired_neg.push_back({r.x, r.y_minus});
        }
        return d;
    }
};

/// Synthetic planted-reward preference data. A K x M reward table R with
/// standard-normal entries is drawn from the seed; positives sample
/// y ~ softmax(R[x]/temp), negatives y ~ softmax(-R[x]/temp). Paired mode
/// resamples the negative until it differs from the chosen response.
inline PreferenceDataset generate(std::size_t k, std::size_t m, std::size_t n, PreferenceMode mode,
                                  double temp, std::uint64_t seed) {
    if (k < 2 || m < 2) throw std::invalid_argument("generate: K and M must be >= 2");
    if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
    if (!(temp > 0.0)) throw std::invalid_argument("generate: temp must be > 0");

    std::mt19937_64 rng(mix_seed(seed, 0xd47ae5));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> reward(k * m);
    for (double& r : reward) r = normal(rng);

    auto softmax_row = [&](std::size_t x, double sign) {
        std::vector<double> logits(m);
        for (std::size_t y = 0; y < m; ++y) logits[y] = sign * reward[x * m + y] / temp;
        const double lse = logsumexp(logits);
        for (double& v : logits) v = std::exp(v - lse);
        return logits;
    };
    auto sample_cat = [&](const std::vector<double>& p) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double r = unif(rng), acc = 0.0;
        for (std::size_t y = 0; y < p.size(); ++y) {
            acc += p[y];
            if (r < acc) return y;
        }
        return p.size() - 1;
    };

    PreferenceDataset d;
    d.mode = mode;
    d.k = k;
    d.m = m;
    d.meta = {seed, temp, true};
    std::uniform_int_distribution<std::size_t> prompt(0, k - 1);

    if (mode == PreferenceMode::Paired) {
        d.paired.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t x = prompt(rng);
            const auto pos = softmax_row(x, 1.0);
            const auto neg = softmax_row(x, -1.0);
            const std::size_t yp = sample_cat(pos);
            std::size_t ym = sample_cat(neg);
            while (ym == yp) ym = sample_cat(neg);
            d.paired.push_back({x, yp, ym});
        }
    } else {
        d.unpaired_pos.reserve(n);
        d.unpaired_neg.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t x = prompt(rng);
            d.unpaired_pos.push_back({x, sample_cat(softmax_row(x, 1.0))});
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t x = prompt(rng);
            d.unpaired_neg.push_back({x, sample_cat(softmax_row(x, -1.0))});
        }
    }
    return d;
}

/// The planted reward table used by generate() for a given seed, so
/// evaluators can verify the implied preference ordering.
inline std::vector<double> planted_reward_table(std::size_t k, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0xd47ae5));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> reward(k * m);
    for (double& r : reward) r = normal(rng);
    return reward;
}

class DatasetParseError : public std::runtime_error {
public:
    DatasetParseError(std::size_t line, const std::string& what)
        : std::runtime_error("dataset line " + std::to_string(line) + ": " + what), line_number(line) {}
    std::size_t line_number;
};

/// One record per line, no header:
///   paired   {"x":0,"yp":3,"ym":1}
///   unpaired {"x":0,"y":3,"label":"pos"}
inline void write_dataset(const PreferenceDataset& d, std::ostream& os) {
    if (d.mode == PreferenceMode::Paired) {
        for (const auto& r : d.paired)
            os << "{\"x\":" << r.x << ",\"yp\":" << r.y_plus << ",\"ym\":" << r.y_minus << "}\n";
    } else {
        for (const auto& r : d.unpaired_pos)
            os << "{\"x\":" << r.x << ",\"y\":" << r.y << ",\"label\":\"pos\"}\n";
        for (const auto& r : d.unpaired_neg)
            os << "{\"x\":" << r.x << ",\"y\":" << r.y << ",\"label\":\"neg\"}\n";
    }
}

inline void save_dataset(const PreferenceDataset& d, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_dataset(d, os);
}

/// Parse JSONL preference data. Shape is taken from the first record; mixed
/// shapes, unknown keys, wrong types, or (when dims are given) out-of-range
/// indices are errors naming the offending line. With k/m omitted (0), dims
/// are inferred as max index + 1.
inline PreferenceDataset read_dataset(std::istream& is, std::size_t k = 0, std::size_t m = 0) {
    PreferenceDataset d;
    d.k = k;
    d.m = m;
    bool mode_known = false;
    std::string line;
    std::size_t lineno = 0;
    std::size_t max_x = 0, max_y = 0;
    bool any = false;

    auto get_index = [&](const nlohmann::json& j, const char* key) -> std::size_t {
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw DatasetParseError(lineno, std::string("field '") + key + "' must be a nonnegative integer");
        return v.get<std::size_t>();
    };

    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw DatasetParseError(lineno, std::string("not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw DatasetParseError(lineno, "record must be a JSON object");

        const bool paired_shape = j.contains("yp");
        if (!mode_known) {
            d.mode = paired_shape ? PreferenceMode::Paired : PreferenceMode::Unpaired;
            mode_known = true;
        }
        if (paired_shape != (d.mode == PreferenceMode::Paired))
            throw DatasetParseError(lineno, "mixed paired/unpaired records");

        if (d.mode == PreferenceMode::Paired) {
            if (j.size() != 3 || !j.contains("x") || !j.contains("ym"))
                throw DatasetParseError(lineno, "paired record must have exactly keys x, yp, ym");
            PairedRecord r{get_index(j, "x"), get_index(j, "yp"), get_index(j, "ym")};
            if (r.y_plus == r.y_minus) throw DatasetParseError(lineno, "yp and ym must differ");
            max_x = std::max(max_x, r.x);
            max_y = std::max({max_y, r.y_plus, r.y_minus});
            d.paired.push_back(r);
        } else {
            if (j.size() != 3 || !j.contains("x") || !j.contains("y") || !j.contains("label"))
                throw DatasetParseError(lineno, "unpaired record must have exactly keys x, y, label");
            if (!j.at("label").is_string())
                throw DatasetParseError(lineno, "label must be \"pos\" or \"neg\"");
            const std::string label = j.at("label").get<std::string>();
            ItemRecord r{get_index(j, "x"), get_index(j, "y")};
            max_x = std::max(max_x, r.x);
            max_y = std::max(max_y, r.y);
            if (label == "pos")
                d.unpaired_pos.push_back(r);
            else if (label == "neg")
                d.unpaired_neg.push_back(r);
            else
                throw DatasetParseError(lineno, "label must be \"pos\" or \"neg\"");
        }
        if (k > 0 && max_x >= k) throw DatasetParseError(lineno, "prompt index out of range");
        if (m > 0 && max_y >= m) throw DatasetParseError(lineno, "response index out of range");
        any = true;
    }
    if (!any) throw std::runtime_error("dataset is empty");
    if (k == 0) d.k = max_x + 1;
    if (m == 0) d.m = max_y + 1;
    return d;
}

inline PreferenceDataset load_dataset(const std::string& path, std::size_t k = 0, std::size_t m = 0) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return read_dataset(is, k, m);
}

}  // namespace aot
