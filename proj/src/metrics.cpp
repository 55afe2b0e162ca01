#include "alarm_pipeline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace alarm_pipeline {

namespace {

Metric ratio(std::int64_t num, std::int64_t den)
{
    if (den <= 0)
        return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

double round_to_tenth_percent(double x)
{
    return std::round(x * 1000.0) / 1000.0;
}

} // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o)
{
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
}

AlarmCounts& AlarmCounts::operator+=(const AlarmCounts& o)
{
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
}

Metric specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }
Metric sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
Metric precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }

Metric alarm_precision(const AlarmCounts& a) { return ratio(a.tp, a.tp + a.fp); }
Metric alarm_sensitivity(const AlarmCounts& a) { return ratio(a.tp, a.tp + a.fn); }

Metric f_beta(double p, double se, double beta)
{
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("beta must be positive and finite");
    if (!(p >= 0.0 && p <= 1.0) || !(se >= 0.0 && se <= 1.0))
        throw std::invalid_argument("precision and sensitivity must lie in [0, 1]");
    if (p == 0.0 && se == 0.0)
        return std::nullopt;
    const double b2 = beta * beta;
    return (1.0 + b2) * p * se / (b2 * p + se);
}

Metric f_beta(Metric p, Metric se, double beta)
{
    if (!p || !se)
        return std::nullopt;
    return f_beta(*p, *se, beta);
}

double weighted_bce(double p, int t, const LossParams& params)
{
    if (t != 0 && t != 1)
        throw std::invalid_argument("target must be 0 (Fall) or 1 (No-Fall)");
    if (!(params.w0 > 0.0) || !(params.w1 > 0.0))
        throw std::invalid_argument("class weights must be positive");
    if (std::isnan(p))
        throw std::invalid_argument("prediction is NaN");
    const double q = std::clamp(p, kLogClamp, 1.0 - kLogClamp);
    return t == 1 ? -params.w1 * std::log(q) : -params.w0 * std::log1p(-q);
}

MetricReport make_report(const ConfusionCounts& stack,
                         const AlarmCounts& alarm,
                         std::span<const double> betas,
                         FBetaInputs inputs)
{
    MetricReport r;
    r.stack = stack;
    r.alarm = alarm;
    r.sp = specificity(stack);
    r.se = sensitivity(stack);
    r.p = precision(stack);
    r.p_a = alarm_precision(alarm);
    r.se_a = alarm_sensitivity(alarm);

    Metric pa = r.p_a;
    Metric sea = r.se_a;
    if (inputs == FBetaInputs::RoundedPercent) {
        if (pa)
            pa = round_to_tenth_percent(*pa);
        if (sea)
            sea = round_to_tenth_percent(*sea);
    }
    for (double beta : betas)
        r.f_beta[beta] = f_beta(pa, sea, beta);
    return r;
}

MetricReport macro_average(std::span<const MetricReport> reports)
{
    if (reports.empty())
        throw std::invalid_argument("macro_average needs at least one report");

    auto mean_of = [&](auto field) -> Metric {
        double sum = 0.0;
        int n = 0;
        for (const auto& r : reports) {
            if (const Metric m = field(r)) {
                sum += *m;
                ++n;
            }
        }
        if (n == 0)
            return std::nullopt;
        return sum / n;
    };

    MetricReport out;
    out.sp = mean_of([](const MetricReport& r) { return r.sp; });
    out.se = mean_of([](const MetricReport& r) { return r.se; });
    out.p = mean_of([](const MetricReport& r) { return r.p; });
    out.p_a = mean_of([](const MetricReport& r) { return r.p_a; });
    out.se_a = mean_of([](const MetricReport& r) { return r.se_a; });

    for (const auto& r : reports) {
        for (const auto& [beta, value] : r.f_beta)
            out.f_beta.emplace(beta, std::nullopt);
    }
    for (auto& [beta, value] : out.f_beta) {
        const double b = beta;
        value = mean_of([b](const MetricReport& r) -> Metric {
            auto it = r.f_beta.find(b);
            return it == r.f_beta.end() ? std::nullopt : it->second;
        });
    }

    for (const auto& r : reports) {
        out.stack += r.stack;
        out.alarm += r.alarm;
    }
    out.averaged_over = static_cast<int>(reports.size());
    return out;
}

nlohmann::ordered_json to_json(const Metric& metric)
{
    if (!metric)
        return nullptr;
    return *metric;
}

nlohmann::ordered_json to_json(const MetricReport& r)
{
    nlohmann::ordered_json j;
    j["sp"] = to_json(r.sp);
    j["se"] = to_json(r.se);
    j["p"] = to_json(r.p);
    j["p_a"] = to_json(r.p_a);
    j["se_a"] = to_json(r.se_a);
    auto fb = nlohmann::ordered_json::object();
    for (const auto& [beta, value] : r.f_beta) {
        char key[32];
        std::snprintf(key, sizeof key, "%g", beta);
        fb[key] = to_json(value);
    }
    j["f_beta"] = std::move(fb);
    j["counts"] = {
        {"stack", {{"TP", r.stack.tp}, {"TN", r.stack.tn}, {"FP", r.stack.fp}, {"FN", r.stack.fn}}},
        {"alarm", {{"TP_a", r.alarm.tp}, {"FP_a", r.alarm.fp}, {"FN_a", r.alarm.fn}}},
    };
    if (r.averaged_over > 1)
        j["macro_average_of"] = r.averaged_over;
    return j;
}

} // namespace alarm_pipeline
