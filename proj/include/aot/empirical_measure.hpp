#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aot/numeric.hpp"

namespace aot {

/// Empirical measure on the real line: weighted atoms kept in nondecreasing
/// order, weights normalized to sum 1. Immutable after construction.
class EmpiricalMeasure {
public:
    /// Uniform weights 1/n.
    explicit EmpiricalMeasure(std::vector<double> values) {
        std::vector<double> w(values.size(), values.empty() ? 0.0 : 1.0 / static_cast<double>(values.size()));
        init(std::move(values), std::move(w), /*normalize=*/false);
    }

    EmpiricalMeasure(std::vector<double> values, std::vector<double> weights) {
        init(std::move(values), std::move(weights), /*normalize=*/true);
    }

    static EmpiricalMeasure from_pairs(const std::vector<std::pair<double, double>>& pairs) {
        std::vector<double> v, w;
        v.reserve(pairs.size());
        w.reserve(pairs.size());
        for (const auto& [value, weight] : pairs) {
            v.push_back(value);
            w.push_back(weight);
        }
        return EmpiricalMeasure(std::move(v), std::move(w));
    }

    std::size_t size() const { return atoms_.size(); }
    const std::vector<double>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }

    /// Left-continuous inverse of the CDF: inf{eta : F(eta) >= p}, p in (0,1].
    double quantile(double p) const {
        if (!(p > 0.0) || p > 1.0 || std::isnan(p))
            throw std::domain_error("quantile: p must lie in (0, 1]");
        auto it = std::lower_bound(cum_.begin(), cum_.end(), p);
        if (it == cum_.end()) return atoms_.back();  // guards p==1 vs cum rounding
        return atoms_[static_cast<std::size_t>(it - cum_.begin())];
    }

    /// Right-continuous step CDF: total weight of atoms <= x.
    double cdf(double x) const {
        if (std::isnan(x)) throw std::domain_error("cdf: x is NaN");
        auto it = std::upper_bound(atoms_.begin(), atoms_.end(), x);
        if (it == atoms_.begin()) return 0.0;
        return cum_[static_cast<std::size_t>(it - atoms_.begin()) - 1];
    }

    std::vector<double> quantile_curve(const std::vector<double>& grid) const {
        if (grid.empty()) throw std::domain_error("quantile_curve: empty grid");
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!(grid[i] > 0.0) || grid[i] > 1.0)
                throw std::domain_error("quantile_curve: grid values must lie in (0, 1]");
            if (i > 0 && grid[i] < grid[i - 1])
                throw std::domain_error("quantile_curve: grid must be nondecreasing");
        }
        std::vector<double> out;
        out.reserve(grid.size());
        for (double p : grid) out.push_back(quantile(p));
        return out;
    }

    /// Cumulative weights; the last entry is pinned to exactly 1.
    const std::vector<double>& cumulative() const { return cum_; }

    void write_csv(std::ostream& os) const {
        os << "value,weight\n";
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            os << format_double(atoms_[i]) << ',' << format_double(weights_[i]) << '\n';
    }

    void save_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open for writing: " + path);
        write_csv(os);
    }

    /// Two-column `value,weight` CSV; a single column means uniform weight.
    /// An optional `value,weight` header line is skipped.
    static EmpiricalMeasure read_csv(std::istream& is) {
        std::vector<std::pair<double, double>> pairs;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            if (lineno == 1 && line.rfind("value", 0) == 0) continue;
            std::istringstream ls(line);
            std::string field;
            std::vector<double> cols;
            while (std::getline(ls, field, ',')) {
                try {
                    std::size_t pos = 0;
                    double v = std::stod(field, &pos);
                    if (pos != field.size()) throw std::invalid_argument(field);
                    cols.push_back(v);
                } catch (const std::exception&) {
                    throw std::runtime_error("CSV parse error at line " + std::to_string(lineno));
                }
            }
            if (cols.size() == 1)
                pairs.emplace_back(cols[0], 1.0);
            else if (cols.size() == 2)
                pairs.emplace_back(cols[0], cols[1]);
            else
                throw std::runtime_error("CSV parse error at line " + std::to_string(lineno) +
                                         ": expected 1 or 2 columns");
        }
        if (pairs.empty()) throw std::runtime_error("CSV contains no samples");
        return from_pairs(pairs);
    }

    static EmpiricalMeasure load_csv(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open: " + path);
        return read_csv(is);
    }

private:
    void init(std::vector<double> values, std::vector<double> weights, bool normalize) {
        if (values.empty()) throw std::invalid_argument("EmpiricalMeasure: needs at least one atom");
        if (values.size() != weights.size())
            throw std::invalid_argument("EmpiricalMeasure: atoms/weights length mismatch");
        double total = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i]))
                throw std::invalid_argument("EmpiricalMeasure: atoms must be finite");
            if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
                throw std::invalid_argument("EmpiricalMeasure: weights must be positive and finite");
            total += weights[i];
        }
        if (normalize) {
            for (double& w : weights) w /= total;
        }
        // stable sort by value, weights carried along; duplicates stay distinct
        std::vector<std::size_t> order(values.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        atoms_.resize(values.size());
        weights_.resize(values.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            atoms_[i] = values[order[i]];
            weights_[i] = weights[order[i]];
        }
        cum_.resize(weights_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            acc += weights_[i];
            cum_[i] = acc;
        }
        if (std::fabs(cum_.back() - 1.0) > 1e-12)
            throw std::invalid_argument("EmpiricalMeasure: weights must sum to 1");
        cum_.back() = 1.0;
    }

    std::vector<double> atoms_;
    std::vector<double> weights_;
    std::vector<double> cum_;
};

}  // namespace aot
