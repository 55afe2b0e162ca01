#include "alarm_pipeline/tuning.hpp"

#include "alarm_pipeline/corpus_io.hpp"
#include "alarm_pipeline/error.hpp"
#include "parallel.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace alarm_pipeline {

namespace {

double parse_double(const std::string& s, const std::string& context)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError("bad number '" + s + "' in " + context);
    return v;
}

std::string metric_text(const Metric& m)
{
    return m ? format_real(*m) : std::string();
}

// Sensitivity drop is compared in percentage points; the slack absorbs
// representation error such as (1.0 - 0.9) * 100 = 10.000000000000009.
constexpr double kDropSlack = 1e-9;

} // namespace

GridSpec GridSpec::defaults()
{
    GridSpec g;
    for (int k = 1; k <= 40; ++k)
        g.widths.push_back(FilterWidth::seconds(k / 20.0));
    for (int k = 1; k <= 9; ++k)
        g.thresholds.push_back(k / 10.0);
    return g;
}

std::vector<double> parse_range(const std::string& text)
{
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string::npos ? c1 : text.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw InputError("range '" + text + "' is not start:stop:step");
    const double start = parse_double(text.substr(0, c1), text);
    const double stop = parse_double(text.substr(c1 + 1, c2 - c1 - 1), text);
    const double step = parse_double(text.substr(c2 + 1), text);
    if (!(step > 0.0) || stop < start)
        throw InputError("range '" + text + "' needs step > 0 and stop >= start");

    std::vector<double> values;
    const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long long i = 0; i < count; ++i)
        values.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
    return values;
}

std::vector<const SweepCell*> SweepGrid::cells_for(const std::string& database_id) const
{
    std::vector<const SweepCell*> out;
    for (const auto& c : cells) {
        if (c.database_id == database_id)
            out.push_back(&c);
    }
    return out;
}

SweepGrid sweep(std::span<const Database> databases,
                const GridSpec& grid,
                std::span<const double> betas,
                const StackConfig& stack,
                unsigned threads)
{
    validate(stack);
    if (grid.widths.empty() || grid.thresholds.empty())
        throw InputError("sweep grid needs at least one width and one threshold");
    for (double t : grid.thresholds)
        validate(FilterConfig{FilterWidth::frames(1), t});

    SweepGrid out;
    out.grid = grid;
    out.betas.assign(betas.begin(), betas.end());

    std::vector<const Database*> active;
    for (const auto& db : databases) {
        if (db.videos.empty())
            out.skipped_databases.push_back(db.database_id);
        else
            active.push_back(&db);
    }

    const std::size_t nw = grid.widths.size();
    const std::size_t nt = grid.thresholds.size();
    out.cells.resize(active.size() * nw * nt);

    // One task per (database, width): filter each video once, then threshold.
    detail::parallel_for(active.size() * nw, threads, [&](std::size_t task) {
        const Database& db = *active[task / nw];
        const FilterWidth& width = grid.widths[task % nw];

        std::vector<std::vector<double>> filtered;
        filtered.reserve(db.videos.size());
        for (const auto& v : db.videos)
            filtered.push_back(gate_filter(v.stream.values(), width.to_frames(v.annotation.fps)));

        for (std::size_t ti = 0; ti < nt; ++ti) {
            ConfusionCounts stack_counts;
            AlarmCounts alarm_counts;
            for (std::size_t vi = 0; vi < db.videos.size(); ++vi) {
                const auto& v = db.videos[vi];
                const auto ev = evaluate_filtered(v.stream, filtered[vi], v.annotation, grid.thresholds[ti], stack);
                stack_counts += ev.stack;
                alarm_counts += ev.alarms.counts;
            }
            auto& cell = out.cells[task * nt + ti];
            cell.database_id = db.database_id;
            cell.width = width;
            cell.threshold = grid.thresholds[ti];
            cell.report = make_report(stack_counts, alarm_counts, betas);
        }
    });
    return out;
}

void write_sweep_csv(std::ostream& out, const SweepGrid& grid)
{
    out << "database_id,beta,W_seconds,T_pred,f_beta,p_a,se_a,TP_a,FP_a,FN_a\n";
    std::vector<std::string> order;
    for (const auto& c : grid.cells) {
        if (order.empty() || order.back() != c.database_id)
            order.push_back(c.database_id);
    }
    for (const auto& db : order) {
        const auto cells = grid.cells_for(db);
        for (double beta : grid.betas) {
            for (const SweepCell* c : cells) {
                const auto& r = c->report;
                // Frame-unit widths have no single duration; they are written as "<n>f".
                const std::string width = c->width.unit() == FilterWidth::Unit::Seconds
                                              ? format_real(c->width.value())
                                              : std::to_string(c->width.to_frames(1.0)) + "f";
                out << db << ',' << format_real(beta) << ',' << width << ',' << format_real(c->threshold) << ','
                    << metric_text(r.f_beta.at(beta)) << ',' << metric_text(r.p_a) << ',' << metric_text(r.se_a)
                    << ',' << r.alarm.tp << ',' << r.alarm.fp << ',' << r.alarm.fn << '\n';
            }
        }
    }
}

void validate(const TuningConstraints& constraints)
{
    if (!(constraints.min_alarm_precision >= 0.0 && constraints.min_alarm_precision < 1.0))
        throw InputError("min_alarm_precision must lie in [0, 1)");
    if (!(constraints.max_sensitivity_drop >= 0.0))
        throw InputError("max_sensitivity_drop must be >= 0");
}

std::map<std::string, Metric> baseline_sensitivity(std::span<const Database> databases, const StackConfig& stack)
{
    const FilterConfig identity{FilterWidth::frames(1), 0.5};
    std::map<std::string, Metric> out;
    for (const auto& db : databases) {
        if (db.videos.empty())
            continue;
        out[db.database_id] = evaluate_database(db, identity, stack, {}).report.se_a;
    }
    return out;
}

bool satisfies(const MetricReport& report, const Metric& baseline_se_a, const TuningConstraints& c)
{
    if (report.p_a) {
        if (*report.p_a < c.min_alarm_precision)
            return false;
    }
    else if (c.min_alarm_precision > 0.0) {
        return false;
    }
    if (baseline_se_a) {
        if (!report.se_a)
            return false;
        if ((*baseline_se_a - *report.se_a) * 100.0 > c.max_sensitivity_drop + kDropSlack)
            return false;
    }
    return true;
}

double DatabaseOptimum::f_beta() const
{
    if (!best)
        throw InfeasibleError("database '" + database_id + "' has no feasible configuration");
    return *best->report.f_beta.at(beta);
}

std::vector<DatabaseOptimum> per_database_argmax(const SweepGrid& grid, double beta, const TuningConstraints& c)
{
    validate(c);
    if (std::find(grid.betas.begin(), grid.betas.end(), beta) == grid.betas.end())
        throw InputError("beta " + format_real(beta) + " was not swept");

    std::vector<DatabaseOptimum> out;
    for (const auto& cell : grid.cells) {
        if (out.empty() || out.back().database_id != cell.database_id)
            out.push_back({cell.database_id, std::nullopt, beta});
        auto& opt = out.back();

        const Metric f = cell.report.f_beta.at(beta);
        if (!f)
            continue;
        const auto it = c.baseline_se_a.find(cell.database_id);
        if (!satisfies(cell.report, it == c.baseline_se_a.end() ? Metric{} : it->second, c))
            continue;

        bool better = !opt.best;
        if (!better) {
            const double best_f = *opt.best->report.f_beta.at(beta);
            if (*f != best_f)
                better = *f > best_f;
            else if (!(cell.width == opt.best->width))
                better = cell.width < opt.best->width;
            else
                better = cell.threshold < opt.best->threshold;
        }
        if (better)
            opt.best = cell;
    }
    return out;
}

FinalChoice average_optima(std::span<const DatabaseOptimum> optima, std::span<const double> threshold_grid)
{
    double w_sum = 0.0;
    double t_sum = 0.0;
    int n = 0;
    for (const auto& o : optima) {
        if (!o.best)
            continue;
        if (o.best->width.unit() != FilterWidth::Unit::Seconds)
            throw InputError("cannot average a width given in frames (database '" + o.database_id + "')");
        w_sum += o.best->width.value();
        t_sum += o.best->threshold;
        ++n;
    }
    if (n == 0)
        throw InfeasibleError("no database has a feasible (W, T_pred)");

    FinalChoice choice{w_sum / n, t_sum / n};
    if (!threshold_grid.empty()) {
        double best = threshold_grid.front();
        for (double t : threshold_grid) {
            const double d = std::abs(t - choice.threshold);
            const double bd = std::abs(best - choice.threshold);
            if (d < bd - 1e-12 || (std::abs(d - bd) <= 1e-12 && t < best))
                best = t;
        }
        choice.threshold = best;
    }
    return choice;
}

nlohmann::ordered_json to_json(const TuningConstraints& c)
{
    nlohmann::ordered_json j;
    j["min_alarm_precision"] = c.min_alarm_precision;
    j["max_sensitivity_drop_points"] = c.max_sensitivity_drop;
    auto base = nlohmann::ordered_json::object();
    for (const auto& [db, se] : c.baseline_se_a)
        base[db] = to_json(se);
    j["baseline_se_a"] = std::move(base);
    return j;
}

nlohmann::ordered_json to_json(const DatabaseOptimum& o)
{
    nlohmann::ordered_json j;
    j["database_id"] = o.database_id;
    j["beta"] = o.beta;
    j["feasible"] = o.feasible();
    if (o.best) {
        if (o.best->width.unit() == FilterWidth::Unit::Seconds)
            j["W_seconds"] = o.best->width.value();
        else
            j["W_frames"] = static_cast<std::int64_t>(o.best->width.value());
        j["T_pred"] = o.best->threshold;
        j["f_beta"] = o.f_beta();
        j["metrics"] = to_json(o.best->report);
    }
    return j;
}

} // namespace alarm_pipeline
