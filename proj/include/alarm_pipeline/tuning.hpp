#pragma once

#include "alarm_pipeline/corpus.hpp"
#include "alarm_pipeline/metrics.hpp"
#include "alarm_pipeline/temporal.hpp"

#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace alarm_pipeline {

struct GridSpec {
    std::vector<FilterWidth> widths;
    std::vector<double> thresholds;

    /// W in 0.05 s steps up to 2.0 s, T_pred from 0.1 to 0.9 in 0.1 steps.
    static GridSpec defaults();
};

/// Parses "start:stop:step" (inclusive stop) into evenly spaced values.
/// Values are computed as start + i * step, rounded to 12 decimals.
std::vector<double> parse_range(const std::string& text);

struct SweepCell {
    std::string database_id;
    FilterWidth width = FilterWidth::frames(1);
    double threshold = 0.5;
    MetricReport report;
};

struct SweepGrid {
    GridSpec grid;
    std::vector<double> betas;
    /// Database-major, then width, then threshold.
    std::vector<SweepCell> cells;
    std::vector<std::string> skipped_databases;

    std::vector<const SweepCell*> cells_for(const std::string& database_id) const;
};

/// Evaluates every (database, W, T_pred) cell. Databases without videos are
/// skipped and listed in `skipped_databases`. Work is spread over `threads`
/// workers; the result does not depend on the thread count.
SweepGrid sweep(std::span<const Database> databases,
                const GridSpec& grid,
                std::span<const double> betas,
                const StackConfig& stack,
                unsigned threads = 1);

/// One CSV row per (database, beta, W, T_pred):
/// database_id,beta,W_seconds,T_pred,f_beta,p_a,se_a,TP_a,FP_a,FN_a
void write_sweep_csv(std::ostream& out, const SweepGrid& grid);

struct TuningConstraints {
    double min_alarm_precision = 0.80;
    /// Largest allowed drop of se_a below the baseline, in percentage points.
    double max_sensitivity_drop = 10.0;
    /// se_a per database at the identity filter and T_pred = 0.5.
    std::map<std::string, Metric> baseline_se_a;
};

void validate(const TuningConstraints& constraints);

/// Baseline se_a for each database: filter width 1 frame, T_pred = 0.5.
std::map<std::string, Metric> baseline_sensitivity(std::span<const Database> databases,
                                                   const StackConfig& stack);

bool satisfies(const MetricReport& report, const Metric& baseline_se_a, const TuningConstraints& constraints);

struct DatabaseOptimum {
    std::string database_id;
    /// Empty when no cell meets the constraints.
    std::optional<SweepCell> best;
    double beta = 0.5;

    bool feasible() const { return best.has_value(); }
    double f_beta() const;
};

/// Constrained argmax of F-beta per database. Ties go to the smaller W, then
/// the smaller T_pred. Cells with undefined F-beta never win.
std::vector<DatabaseOptimum> per_database_argmax(const SweepGrid& grid,
                                                 double beta,
                                                 const TuningConstraints& constraints);

struct FinalChoice {
    double width_seconds = 0.0;
    double threshold = 0.0;
};

/// Mean of the feasible per-database optima. The mean threshold snaps to the
/// nearest value of `threshold_grid` (ties to the smaller) when the grid is
/// not empty. Throws InfeasibleError when no database is feasible and
/// InputError when an optimum's width is not in seconds.
FinalChoice average_optima(std::span<const DatabaseOptimum> optima, std::span<const double> threshold_grid);

nlohmann::ordered_json to_json(const TuningConstraints& constraints);
nlohmann::ordered_json to_json(const DatabaseOptimum& optimum);

} // namespace alarm_pipeline
