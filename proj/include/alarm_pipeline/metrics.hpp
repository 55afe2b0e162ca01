#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace alarm_pipeline {

/// A ratio metric; empty when its denominator is zero. Kept distinct from 0 so
/// undefined entries drop out of averages instead of dragging them down.
using Metric = std::optional<double>;

/// Stack-level confusion with Fall as the positive class.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o);
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Alarm-level counts. tp + fn equals the number of ground-truth falls.
struct AlarmCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    AlarmCounts& operator+=(const AlarmCounts& o);
    friend bool operator==(const AlarmCounts&, const AlarmCounts&) = default;
};

Metric specificity(const ConfusionCounts& c);
Metric sensitivity(const ConfusionCounts& c);
Metric precision(const ConfusionCounts& c);

Metric alarm_precision(const AlarmCounts& a);
Metric alarm_sensitivity(const AlarmCounts& a);

/// (1 + b^2) p s / (b^2 p + s). Undefined when p = s = 0. Throws
/// std::invalid_argument for beta <= 0 or arguments outside [0, 1].
Metric f_beta(double precision, double sensitivity, double beta);
Metric f_beta(Metric precision, Metric sensitivity, double beta);

struct LossParams {
    /// Weight of the Fall class (t = 0).
    double w0 = 1.0;
    /// Weight of the No-Fall class (t = 1).
    double w1 = 1.0;
};

inline constexpr double kLogClamp = 1e-12;

/// -(w1 t log p + w0 (1 - t) log(1 - p)), with p clamped to [eps, 1 - eps].
/// t is 1 for No-Fall ground truth and 0 for Fall.
double weighted_bce(double p, int t, const LossParams& params);

/// How F-beta is derived from p_a and se_a.
enum class FBetaInputs {
    /// From the exact ratios.
    Exact,
    /// From p_a and se_a first rounded to one decimal in percent, the way a
    /// results table printed at that precision was derived.
    RoundedPercent,
};

struct MetricReport {
    Metric sp;
    Metric se;
    Metric p;
    Metric p_a;
    Metric se_a;
    std::map<double, Metric> f_beta;
    ConfusionCounts stack;
    AlarmCounts alarm;
    /// Number of per-database reports folded into a macro average; 1 otherwise.
    int averaged_over = 1;
};

MetricReport make_report(const ConfusionCounts& stack,
                         const AlarmCounts& alarm,
                         std::span<const double> betas,
                         FBetaInputs inputs = FBetaInputs::Exact);

/// Unweighted mean of every defined metric across reports (F-beta per beta).
/// Counts in the result are pooled sums, kept for reference only.
MetricReport macro_average(std::span<const MetricReport> reports);

nlohmann::ordered_json to_json(const MetricReport& report);
nlohmann::ordered_json to_json(const Metric& metric);

} // namespace alarm_pipeline
