#pragma once

// Trust arithmetic: classification bands, majority partition, group trust
// and the cumulative certificate update. Everything here is a pure function.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trustwatch {

using NodeId = std::uint32_t;

enum class TrustClass { Malicious, Suspected, Trusted };

inline const char* to_string(TrustClass c) {
    switch (c) {
    case TrustClass::Malicious: return "malicious";
    case TrustClass::Suspected: return "suspected";
    case TrustClass::Trusted: return "trusted";
    }
    return "?";
}

inline constexpr double kMaliciousBelow = 0.4;
inline constexpr double kTrustedAbove = 0.9;

struct Observation {
    NodeId respondent = 0;
    double maliciousness = 0.0;   // fraction of monitored packets dropped or modified
    double weight = 1.0;
    double respondent_trust = 1.0;
};

struct UpdateParams {
    double alpha = 0.6;                    // weight of the old distrust
    double alpha2 = 0.8;                   // weight of the certificate
    double delta = 0.001;                  // replenishment per interval
    double W = 0.0;                        // <= 0 means: sum of respondent weights
    double maliciousness_threshold = 0.5;
};

class TrustMathError : public std::invalid_argument {
public:
    enum class Code { EmptyObservationSet, NonPositiveW, InvalidK, OutOfRangeFactor };

    TrustMathError(Code code, const std::string& what)
        : std::invalid_argument(what), code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline TrustClass classify_trust(double t) {
    if (t < kMaliciousBelow) return TrustClass::Malicious;
    if (t > kTrustedAbove) return TrustClass::Trusted;
    return TrustClass::Suspected;
}

struct Partition {
    std::vector<NodeId> majority;   // sorted ascending
    std::vector<NodeId> minority;   // sorted ascending
    bool majority_adverse = false;  // majority is the at-or-above-threshold group
};

/// Splits respondents at `threshold`; the larger side is the majority and a
/// tie goes to the below-threshold side.
inline Partition partition_majority(std::span<const Observation> obs, double threshold) {
    if (obs.empty())
        throw TrustMathError(TrustMathError::Code::EmptyObservationSet,
                             "partition_majority: no observations");
    std::vector<NodeId> adverse;
    std::vector<NodeId> benign;
    for (const auto& o : obs)
        (o.maliciousness >= threshold ? adverse : benign).push_back(o.respondent);
    std::sort(adverse.begin(), adverse.end());
    std::sort(benign.begin(), benign.end());

    Partition p;
    p.majority_adverse = adverse.size() > benign.size();
    if (p.majority_adverse) {
        p.majority = std::move(adverse);
        p.minority = std::move(benign);
    } else {
        p.majority = std::move(benign);
        p.minority = std::move(adverse);
    }
    return p;
}

/// Observations that fall on the majority side of the partition.
inline std::vector<Observation> majority_observations(std::span<const Observation> obs,
                                                      double threshold) {
    const bool adverse = partition_majority(obs, threshold).majority_adverse;
    std::vector<Observation> out;
    for (const auto& o : obs)
        if ((o.maliciousness >= threshold) == adverse) out.push_back(o);
    return out;
}

struct GroupTrustResult {
    double group_trust = 1.0;
    std::vector<NodeId> majority;
    std::vector<NodeId> minority;
    bool majority_adverse = false;
};

/// Absolute trust (1.0) minus the mean maliciousness reported by the majority.
inline GroupTrustResult group_trust(std::span<const Observation> obs, double threshold) {
    Partition p = partition_majority(obs, threshold);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : obs) {
        if ((o.maliciousness >= threshold) == p.majority_adverse) {
            sum += o.maliciousness;
            ++n;
        }
    }
    GroupTrustResult r;
    r.group_trust = clamp01(1.0 - sum / static_cast<double>(n));
    r.majority = std::move(p.majority);
    r.minority = std::move(p.minority);
    r.majority_adverse = p.majority_adverse;
    return r;
}

inline double alpha1(std::span<const Observation> majority, double W) {
    if (!(W > 0.0))
        throw TrustMathError(TrustMathError::Code::NonPositiveW, "alpha1: W must be positive");
    double sum = 0.0;
    for (const auto& o : majority) sum += o.weight * o.respondent_trust;
    return clamp01(sum / W);
}

/// `k` counts certificates accepted for the same subject from the identical
/// respondent set, this one included. Only the first one carries weight.
inline double alpha3(long long k) {
    if (k < 1) throw TrustMathError(TrustMathError::Code::InvalidK, "alpha3: k must be >= 1");
    return k == 1 ? 1.0 : 0.0;
}

inline double beta(double a1, double a2, double a3) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(a1) || !in_unit(a2) || !in_unit(a3))
        throw TrustMathError(TrustMathError::Code::OutOfRangeFactor,
                             "beta: factors must lie in [0,1]");
    return a1 * a2 * a3;
}

namespace detail {
// (1 - new) = alpha (1 - old) + beta (1 - cert) - delta, solved for `new`.
inline double update_trust_raw(double t_old, double t_cert, double alpha, double beta,
                               double delta) {
    return 1.0 - (alpha * (1.0 - t_old) + beta * (1.0 - t_cert) - delta);
}
}  // namespace detail

inline double update_trust(double t_old, double t_cert, double alpha, double beta,
                           double delta) {
    return clamp01(detail::update_trust_raw(t_old, t_cert, alpha, beta, delta));
}

inline double replenish(double t_old, double delta) { return clamp01(t_old + delta); }

}  // namespace trustwatch
