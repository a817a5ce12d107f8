#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "aot/numeric.hpp"

namespace aot {

enum class PenaltyKind { ZeroOne, Hinge, SquaredHinge, Logistic, LeastSquares };

/// Convex surrogate h of the 0/1 dominance-violation indicator.
/// ZeroOne is evaluation-only (no derivative); the rest are differentiable
/// except the hinge kink, where the one-sided limits are taken as documented
/// on deriv().
struct PenaltyFn {
    PenaltyKind kind = PenaltyKind::Logistic;
    double beta = 0.01;
    double label_smoothing = 0.0;  // Logistic only

    static PenaltyFn zero_one() { return {PenaltyKind::ZeroOne, 0.0, 0.0}; }
    static PenaltyFn hinge() { return {PenaltyKind::Hinge, 0.0, 0.0}; }
    static PenaltyFn squared_hinge(double beta) { return checked({PenaltyKind::SquaredHinge, beta, 0.0}); }
    static PenaltyFn logistic(double beta, double label_smoothing = 0.0) {
        return checked({PenaltyKind::Logistic, beta, label_smoothing});
    }
    static PenaltyFn least_squares(double beta) { return checked({PenaltyKind::LeastSquares, beta, 0.0}); }

    double eval(double x) const {
        if (std::isnan(x)) throw std::domain_error("penalty eval: x is NaN");
        switch (kind) {
            case PenaltyKind::ZeroOne:
                return x < 0.0 ? 1.0 : 0.0;
            case PenaltyKind::Hinge:
                return std::max(-x, 0.0);
            case PenaltyKind::SquaredHinge: {
                const double t = std::max(beta - x, 0.0);
                return t * t;
            }
            case PenaltyKind::Logistic:
                return (1.0 - label_smoothing) * log1pexp(-beta * x) +
                       label_smoothing * log1pexp(beta * x);
            case PenaltyKind::LeastSquares: {
                const double t = beta - x;
                return t * t;
            }
        }
        throw std::logic_error("penalty eval: bad kind");
    }

    double deriv(double x) const {
        if (std::isnan(x)) throw std::domain_error("penalty deriv: x is NaN");
        switch (kind) {
            case PenaltyKind::ZeroOne:
                throw std::logic_error("ZeroOne penalty has no derivative");
            case PenaltyKind::Hinge:
                return x < 0.0 ? -1.0 : 0.0;
            case PenaltyKind::SquaredHinge:
                // one-sided limits agree at the kink x == beta: both are 0
                return -2.0 * std::max(beta - x, 0.0);
            case PenaltyKind::Logistic:
                return -beta * (1.0 - label_smoothing) * sigmoid(-beta * x) +
                       beta * label_smoothing * sigmoid(beta * x);
            case PenaltyKind::LeastSquares:
                return -2.0 * (beta - x);
        }
        throw std::logic_error("penalty deriv: bad kind");
    }

    bool differentiable() const { return kind != PenaltyKind::ZeroOne; }

    /// CLI spelling: zero-one | hinge | hinge2:b | logistic:b[:l] | ls:b
    static PenaltyFn parse(const std::string& spec) {
        auto split = [](const std::string& s) {
            std::vector<std::string> parts;
            std::size_t start = 0;
            while (true) {
                auto pos = s.find(':', start);
                parts.push_back(s.substr(start, pos == std::string::npos ? pos : pos - start));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
            return parts;
        };
        auto num = [&](const std::string& s) {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("penalty spec: bad number '" + s + "'");
            return v;
        };
        const auto parts = split(spec);
        const std::string& name = parts[0];
        try {
            if (name == "zero-one" && parts.size() == 1) return zero_one();
            if (name == "hinge" && parts.size() == 1) return hinge();
            if (name == "hinge2" && parts.size() == 2) return squared_hinge(num(parts[1]));
            if (name == "logistic" && (parts.size() == 2 || parts.size() == 3))
                return logistic(num(parts[1]), parts.size() == 3 ? num(parts[2]) : 0.0);
            if (name == "ls" && parts.size() == 2) return least_squares(num(parts[1]));
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("penalty spec: cannot parse '" + spec + "'");
        }
        throw std::invalid_argument("penalty spec: unknown form '" + spec + "'");
    }

    std::string to_string() const {
        switch (kind) {
            case PenaltyKind::ZeroOne: return "zero-one";
            case PenaltyKind::Hinge: return "hinge";
            case PenaltyKind::SquaredHinge: return "hinge2:" + format_double(beta);
            case PenaltyKind::Logistic:
                return label_smoothing == 0.0
                           ? "logistic:" + format_double(beta)
                           : "logistic:" + format_double(beta) + ":" + format_double(label_smoothing);
            case PenaltyKind::LeastSquares: return "ls:" + format_double(beta);
        }
        return "?";
    }

private:
    static PenaltyFn checked(PenaltyFn p) {
        // beta = 0 is meaningful for the hinge family ((-x)_+ style violation
        // metrics); the logistic collapses to a constant there, so reject it.
        if (p.kind == PenaltyKind::Logistic && !(p.beta > 0.0))
            throw std::invalid_argument("logistic penalty: beta must be > 0");
        if (!(p.beta >= 0.0)) throw std::invalid_argument("penalty: beta must be >= 0");
        if (!(p.label_smoothing >= 0.0) || p.label_smoothing >= 0.5)
            throw std::invalid_argument("penalty: label_smoothing must lie in [0, 0.5)");
        return p;
    }
};

}  // namespace aot
