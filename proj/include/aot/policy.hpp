#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aot/numeric.hpp"

#include <json.hpp>

namespace aot {

/// Softmax policy over M responses for each of K prompts, parameterized by a
/// K x M logits table. Logits are kept in [-clamp, clamp] so implicit rewards
/// stay bounded; the projection is applied at construction and after updates.
class TabularPolicy {
public:
    TabularPolicy(std::size_t k, std::size_t m, double clamp = 30.0)
        : k_(k), m_(m), clamp_(clamp), logits_(k * m, 0.0) {
        validate_dims();
    }

    TabularPolicy(std::size_t k, std::size_t m, std::vector<double> logits, double clamp = 30.0)
        : k_(k), m_(m), clamp_(clamp), logits_(std::move(logits)) {
        validate_dims();
        if (logits_.size() != k_ * m_) throw std::invalid_argument("TabularPolicy: logits size mismatch");
        for (double v : logits_) require_finite(v, "logit");
        project();
    }

    std::size_t prompts() const { return k_; }
    std::size_t responses() const { return m_; }
    double clamp() const { return clamp_; }
    const std::vector<double>& logits() const { return logits_; }

    double logit(std::size_t x, std::size_t y) const {
        check_index(x, y);
        return logits_[x * m_ + y];
    }

    void set_logits(std::vector<double> logits) {
        if (logits.size() != k_ * m_) throw std::invalid_argument("TabularPolicy: logits size mismatch");
        for (double v : logits) require_finite(v, "logit");
        logits_ = std::move(logits);
        project();
    }

    /// Clamp every logit into [-clamp, clamp]; idempotent.
    void project() {
        for (double& v : logits_) v = std::min(std::max(v, -clamp_), clamp_);
    }

    double logprob(std::size_t x, std::size_t y) const {
        check_index(x, y);
        const double* row = logits_.data() + x * m_;
        return row[y] - logsumexp(row, m_);
    }

    /// Softmax of row x.
    std::vector<double> probs(std::size_t x) const {
        check_index(x, 0);
        const double* row = logits_.data() + x * m_;
        const double lse = logsumexp(row, m_);
        std::vector<double> p(m_);
        for (std::size_t y = 0; y < m_; ++y) p[y] = std::exp(row[y] - lse);
        return p;
    }

    bool same_shape(const TabularPolicy& other) const { return k_ == other.k_ && m_ == other.m_; }

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["k"] = k_;
        j["m"] = m_;
        j["clamp"] = clamp_;
        j["logits"] = logits_;
        return j.dump();
    }

    static TabularPolicy from_json(const std::string& text) {
        nlohmann::json j = nlohmann::json::parse(text);
        if (!j.is_object() || !j.contains("k") || !j.contains("m") || !j.contains("clamp") ||
            !j.contains("logits"))
            throw std::runtime_error("policy checkpoint: missing field");
        TabularPolicy p(j.at("k").get<std::size_t>(), j.at("m").get<std::size_t>(),
                        j.at("logits").get<std::vector<double>>(), j.at("clamp").get<double>());
        return p;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for writing: " + path);
        os << to_json() << '\n';
    }

    static TabularPolicy load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open: " + path);
        std::stringstream ss;
        ss << is.rdbuf();
        return from_json(ss.str());
    }

private:
    void validate_dims() const {
        if (k_ == 0 || m_ == 0) throw std::invalid_argument("TabularPolicy: K and M must be >= 1");
        if (!(clamp_ > 0.0)) throw std::invalid_argument("TabularPolicy: clamp must be > 0");
    }
    void check_index(std::size_t x, std::size_t y) const {
        if (x >= k_ || y >= m_) throw std::domain_error("TabularPolicy: index out of range");
    }

    std::size_t k_, m_;
    double clamp_;
    std::vector<double> logits_;
};

/// A realized scalar reward together with its exact gradient w.r.t. the
/// trained policy's logits (dense K x M, rows of uninvolved prompts zero).
struct RewardSample {
    double value = 0.0;
    std::vector<double> grad;  // row-major K x M
};

/// r_u(x,y) = log pi_theta(y|x) - log pi_ref(y|x); gradient w.r.t. theta only.
inline RewardSample reward_unpaired(const TabularPolicy& theta, const TabularPolicy& ref,
                                    std::size_t x, std::size_t y) {
    if (!theta.same_shape(ref)) throw std::domain_error("reward_unpaired: policy shape mismatch");
    RewardSample s;
    s.value = theta.logprob(x, y) - ref.logprob(x, y);
    s.grad.assign(theta.prompts() * theta.responses(), 0.0);
    const std::vector<double> p = theta.probs(x);
    double* row = s.grad.data() + x * theta.responses();
    for (std::size_t yp = 0; yp < theta.responses(); ++yp) row[yp] = (yp == y ? 1.0 : 0.0) - p[yp];
    return s;
}

/// r_p(x, y+, y-) = log pi(y+|x) - log pi(y-|x); the softmax normalizations
/// cancel, leaving a plain logit difference.
inline RewardSample reward_paired(const TabularPolicy& p, std::size_t x, std::size_t y_plus,
                                  std::size_t y_minus) {
    RewardSample s;
    s.value = p.logit(x, y_plus) - p.logit(x, y_minus);
    s.grad.assign(p.prompts() * p.responses(), 0.0);
    s.grad[x * p.responses() + y_plus] += 1.0;
    s.grad[x * p.responses() + y_minus] -= 1.0;
    return s;
}

}  // namespace aot
