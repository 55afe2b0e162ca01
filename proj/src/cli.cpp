#include "alarm_pipeline/cli.hpp"

#include "alarm_pipeline/corpus.hpp"
#include "alarm_pipeline/corpus_io.hpp"
#include "alarm_pipeline/error.hpp"
#include "alarm_pipeline/metrics.hpp"
#include "alarm_pipeline/synth.hpp"
#include "alarm_pipeline/temporal.hpp"
#include "alarm_pipeline/tuning.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace alarm_pipeline::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kToolName = "alarm-pipeline";
constexpr const char* kToolVersion = "1.0.0";

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string betas;
    std::string w_grid;
    std::string t_grid;
    std::string counts_only;
    std::string annotations;
    std::string predictions;
    std::optional<double> width_seconds;
    std::optional<std::int64_t> width_frames;
    std::optional<double> threshold;
    std::optional<int> folds;
    bool fbeta_rounded = false;
};

/// Effective settings after merging the config file and flags.
struct RunConfig {
    fs::path annotations;
    fs::path predictions;
    fs::path counts_only;
    fs::path out = "out";
    StackConfig stack;
    FilterConfig filter;
    GridSpec grid = GridSpec::defaults();
    TuningConstraints constraints;
    std::vector<double> betas{0.5, 2.0};
    double tune_beta = 0.5;
    FBetaInputs fbeta_inputs = FBetaInputs::Exact;
    std::uint64_t seed = 1;
    int folds = 5;
    Frame near_limit = 5;
    Frame short_limit = 10;
    std::vector<SynthSpec> synth;
    bool synth_from_config = false;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size())
            throw InputError("bad number '" + item + "' in list '" + text + "'");
        values.push_back(v);
    }
    if (values.empty())
        throw InputError("empty list");
    return values;
}

std::vector<FilterWidth> seconds_widths(const std::vector<double>& values)
{
    std::vector<FilterWidth> out;
    for (double v : values)
        out.push_back(FilterWidth::seconds(v));
    return out;
}

RunConfig resolve(const Flags& flags)
{
    RunConfig rc;
    fs::path base;
    json cfg = json::object();
    if (!flags.config.empty()) {
        const std::string text = read_file(flags.config);
        try {
            cfg = json::parse(text);
        }
        catch (const json::parse_error& e) {
            throw ParseError(flags.config + ": " + e.what());
        }
        if (!cfg.is_object())
            throw ParseError(flags.config + ": top level must be an object");
        base = fs::path(flags.config).parent_path();
    }
    auto path_of = [&](const char* key) -> fs::path {
        if (!cfg.contains(key))
            return {};
        const fs::path p = cfg.at(key).get<std::string>();
        return p.is_relative() ? base / p : p;
    };

    try {
        rc.annotations = path_of("annotations");
        rc.predictions = path_of("predictions");
        rc.counts_only = path_of("counts_only");
        if (cfg.contains("out"))
            rc.out = path_of("out");
        if (auto it = cfg.find("stack"); it != cfg.end()) {
            rc.stack.stack_length = it->value("stack_length", rc.stack.stack_length);
            rc.stack.stride = it->value("stride", rc.stack.stride);
        }
        if (auto it = cfg.find("filter"); it != cfg.end()) {
            if (it->contains("width_seconds"))
                rc.filter.width = FilterWidth::seconds(it->at("width_seconds").get<double>());
            if (it->contains("width_frames"))
                rc.filter.width = FilterWidth::frames(it->at("width_frames").get<std::int64_t>());
            rc.filter.threshold = it->value("threshold", rc.filter.threshold);
        }
        if (auto it = cfg.find("grid"); it != cfg.end()) {
            if (it->contains("w"))
                rc.grid.widths = seconds_widths(parse_range(it->at("w").get<std::string>()));
            if (it->contains("w_values"))
                rc.grid.widths = seconds_widths(it->at("w_values").get<std::vector<double>>());
            if (it->contains("t"))
                rc.grid.thresholds = parse_range(it->at("t").get<std::string>());
            if (it->contains("t_values"))
                rc.grid.thresholds = it->at("t_values").get<std::vector<double>>();
        }
        if (auto it = cfg.find("constraints"); it != cfg.end()) {
            rc.constraints.min_alarm_precision = it->value("min_alarm_precision", rc.constraints.min_alarm_precision);
            rc.constraints.max_sensitivity_drop = it->value("max_sensitivity_drop", rc.constraints.max_sensitivity_drop);
        }
        if (cfg.contains("betas"))
            rc.betas = cfg.at("betas").get<std::vector<double>>();
        rc.tune_beta = cfg.value("tune_beta", rc.tune_beta);
        if (cfg.contains("fbeta_inputs")) {
            const auto mode = cfg.at("fbeta_inputs").get<std::string>();
            if (mode == "rounded")
                rc.fbeta_inputs = FBetaInputs::RoundedPercent;
            else if (mode != "exact")
                throw InputError("fbeta_inputs must be \"exact\" or \"rounded\"");
        }
        rc.seed = cfg.value("seed", rc.seed);
        if (auto it = cfg.find("folds"); it != cfg.end())
            rc.folds = it->value("k", rc.folds);
        if (auto it = cfg.find("offsets"); it != cfg.end()) {
            rc.near_limit = it->value("near_limit", rc.near_limit);
            rc.short_limit = it->value("short_limit", rc.short_limit);
        }
        if (auto it = cfg.find("synth"); it != cfg.end()) {
            rc.synth_from_config = true;
            if (it->is_array()) {
                for (const auto& s : *it)
                    rc.synth.push_back(synth_spec_from_json(s));
            }
            else {
                rc.synth.push_back(synth_spec_from_json(*it));
            }
        }
    }
    catch (const json::exception& e) {
        throw ParseError("config: " + std::string(e.what()));
    }

    if (!flags.annotations.empty())
        rc.annotations = flags.annotations;
    if (!flags.predictions.empty())
        rc.predictions = flags.predictions;
    if (!flags.counts_only.empty())
        rc.counts_only = flags.counts_only;
    if (!flags.out.empty())
        rc.out = flags.out;
    if (flags.seed)
        rc.seed = *flags.seed;
    if (!flags.betas.empty())
        rc.betas = parse_list(flags.betas);
    if (!flags.w_grid.empty())
        rc.grid.widths = seconds_widths(parse_range(flags.w_grid));
    if (!flags.t_grid.empty())
        rc.grid.thresholds = parse_range(flags.t_grid);
    if (flags.width_seconds)
        rc.filter.width = FilterWidth::seconds(*flags.width_seconds);
    if (flags.width_frames)
        rc.filter.width = FilterWidth::frames(*flags.width_frames);
    if (flags.threshold)
        rc.filter.threshold = *flags.threshold;
    if (flags.folds)
        rc.folds = *flags.folds;
    if (flags.fbeta_rounded)
        rc.fbeta_inputs = FBetaInputs::RoundedPercent;

    if (!rc.synth_from_config)
        rc.synth = default_synthetic_corpus(rc.seed);
    else if (flags.seed) {
        for (std::size_t i = 0; i < rc.synth.size(); ++i)
            rc.synth[i].seed = *flags.seed + i;
    }

    validate(rc.stack);
    validate(rc.filter);
    validate(rc.constraints);
    for (double b : rc.betas) {
        if (!(b > 0.0))
            throw InputError("betas must be positive");
    }
    if (!(rc.tune_beta > 0.0))
        throw InputError("tune_beta must be positive");
    return rc;
}

ordered_json widths_json(const std::vector<FilterWidth>& widths)
{
    auto j = ordered_json::array();
    for (const auto& w : widths)
        j.push_back(w.to_string());
    return j;
}

/// Settings that influence the command's results. File locations and
/// settings the command ignores are left out.
ordered_json semantic_config(const std::string& command, const RunConfig& rc)
{
    const bool scores = !(command == "evaluate" && !rc.counts_only.empty());
    ordered_json j;
    j["command"] = command;
    if (command == "synth") {
        auto specs = ordered_json::array();
        for (const auto& s : rc.synth)
            specs.push_back(to_json(s));
        j["synth"] = std::move(specs);
        return j;
    }
    if (command == "folds") {
        j["seed"] = rc.seed;
        j["folds"] = rc.folds;
        return j;
    }
    if (scores)
        j["stack"] = {{"stack_length", rc.stack.stack_length}, {"stride", rc.stack.stride}};
    if (scores && (command == "evaluate" || command == "offsets"))
        j["filter"] = to_json(rc.filter);
    if (command == "sweep" || command == "tune")
        j["grid"] = {{"widths", widths_json(rc.grid.widths)}, {"thresholds", rc.grid.thresholds}};
    if (command == "tune") {
        j["constraints"] = {{"min_alarm_precision", rc.constraints.min_alarm_precision},
                            {"max_sensitivity_drop", rc.constraints.max_sensitivity_drop}};
        j["tune_beta"] = rc.tune_beta;
    }
    if (command != "offsets")
        j["betas"] = rc.betas;
    if (command == "evaluate")
        j["fbeta_inputs"] = rc.fbeta_inputs == FBetaInputs::Exact ? "exact" : "rounded";
    if (command == "offsets")
        j["offsets"] = {{"near_limit", rc.near_limit}, {"short_limit", rc.short_limit}};
    return j;
}

class Outputs {
public:
    Outputs(std::string command, const RunConfig& rc) : command_(std::move(command)), rc_(rc)
    {
        fs::create_directories(rc.out);
    }

    void add_input(const std::string& role, const fs::path& path)
    {
        inputs_.push_back({role, path.string(), hex64(fnv1a(read_file(path)))});
    }

    void write(const std::string& name, const std::string& content)
    {
        std::ofstream out(rc_.out / name, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + (rc_.out / name).string());
        out << content;
        outputs_.push_back(name);
    }

    void write_manifest()
    {
        const auto config = semantic_config(command_, rc_);
        std::string hashed = config.dump();
        for (const auto& in : inputs_)
            hashed += '\n' + in.role + '=' + in.digest;

        ordered_json m;
        m["tool"] = kToolName;
        m["version"] = kToolVersion;
        m["command"] = command_;
        auto ins = ordered_json::array();
        for (const auto& in : inputs_)
            ins.push_back({{"role", in.role}, {"path", in.path}, {"fnv1a64", in.digest}});
        m["inputs"] = std::move(ins);
        m["config"] = config;
        m["config_hash"] = hex64(fnv1a(hashed));
        m["seed"] = rc_.seed;
        m["outputs"] = outputs_;
        std::ofstream out(rc_.out / "manifest.json", std::ios::binary);
        out << m.dump(2) << '\n';
    }

private:
    struct Input {
        std::string role;
        std::string path;
        std::string digest;
    };

    std::string command_;
    const RunConfig& rc_;
    std::vector<Input> inputs_;
    std::vector<std::string> outputs_;
};

std::vector<Database> load_corpus(const RunConfig& rc, Outputs& outputs)
{
    if (rc.annotations.empty() || rc.predictions.empty())
        throw ParseError("annotations and predictions files are required");
    const auto annotations = load_annotations(rc.annotations);
    const auto predictions = load_predictions(rc.predictions);
    outputs.add_input("annotations", rc.annotations);
    outputs.add_input("predictions", rc.predictions);
    if (annotations.empty())
        throw ParseError("empty corpus: " + rc.annotations.string() + " has no videos");
    return pair_corpus(annotations, predictions);
}

std::string percent(const Metric& m)
{
    if (!m)
        return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *m * 100.0);
    return buf;
}

std::string beta_label(double beta)
{
    return "F_" + format_real(beta);
}

/// Database | F_beta... | p_a | se_a | TP_a | FP_a | FN_a, percentages to one decimal.
std::string render_table(const std::vector<std::pair<std::string, MetricReport>>& rows,
                         const MetricReport& average,
                         const std::vector<double>& betas)
{
    std::ostringstream os;
    auto cell = [&](const std::string& s, int w) { os << std::setw(w) << s; };
    os << std::left << std::setw(12) << "Database" << std::right;
    for (double b : betas)
        cell(beta_label(b), 8);
    cell("p_a", 8);
    cell("se_a", 8);
    cell("TP_a", 7);
    cell("FP_a", 7);
    cell("FN_a", 7);
    os << '\n';
    auto line = [&](const std::string& name, const MetricReport& r, bool counts) {
        os << std::left << std::setw(12) << name << std::right;
        for (double b : betas) {
            auto it = r.f_beta.find(b);
            cell(percent(it == r.f_beta.end() ? std::nullopt : it->second), 8);
        }
        cell(percent(r.p_a), 8);
        cell(percent(r.se_a), 8);
        cell(counts ? std::to_string(r.alarm.tp) : "-", 7);
        cell(counts ? std::to_string(r.alarm.fp) : "-", 7);
        cell(counts ? std::to_string(r.alarm.fn) : "-", 7);
        os << '\n';
    };
    for (const auto& [name, r] : rows)
        line(name, r, true);
    line("Avg.", average, false);
    return os.str();
}

/// CSV `database_id,TP_a,FP_a,FN_a` with a header line.
std::vector<std::pair<std::string, AlarmCounts>> read_counts(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::string text;
    if (!std::getline(in, text) || (text.empty() ? text : text.substr(0, text.find_last_not_of('\r') + 1)) !=
                                       "database_id,TP_a,FP_a,FN_a")
        throw ParseError(path.string() + ": line 1: expected header 'database_id,TP_a,FP_a,FN_a'");
    std::vector<std::pair<std::string, AlarmCounts>> rows;
    std::size_t line = 1;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r')
            text.pop_back();
        if (text.empty())
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(text);
        std::string f;
        while (std::getline(ss, f, ','))
            fields.push_back(f);
        auto bad = [&](const std::string& what) {
            throw ParseError(path.string() + ": line " + std::to_string(line) + ": " + what);
        };
        if (fields.size() != 4 || fields[0].empty())
            bad("expected database_id,TP_a,FP_a,FN_a");
        std::int64_t v[3];
        for (int i = 0; i < 3; ++i) {
            const auto& s = fields[static_cast<std::size_t>(i) + 1];
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v[i]);
            if (ec != std::errc() || ptr != s.data() + s.size() || v[i] < 0)
                bad("counts must be non-negative integers");
        }
        rows.push_back({fields[0], AlarmCounts{v[0], v[1], v[2]}});
    }
    return rows;
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out)
{
    Outputs outputs("evaluate", rc);
    std::vector<std::pair<std::string, MetricReport>> rows;
    ordered_json report;
    auto dbs = ordered_json::array();

    if (!rc.counts_only.empty()) {
        const auto counts = read_counts(rc.counts_only);
        outputs.add_input("counts", rc.counts_only);
        if (counts.empty())
            throw ParseError("empty corpus: " + rc.counts_only.string() + " has no rows");
        for (const auto& [db, c] : counts) {
            rows.emplace_back(db, make_report({}, c, rc.betas, rc.fbeta_inputs));
            dbs.push_back({{"database_id", db}, {"metrics", to_json(rows.back().second)}});
        }
        report["mode"] = "counts_only";
    }
    else {
        const auto corpus = load_corpus(rc, outputs);
        for (const auto& db : corpus) {
            const auto ev = evaluate_database(db, rc.filter, rc.stack, rc.betas);
            rows.emplace_back(db.database_id, ev.report);
            dbs.push_back(to_json(ev));
        }
        report["mode"] = "scores";
        report["filter"] = to_json(rc.filter);
        report["stack"] = {{"stack_length", rc.stack.stack_length}, {"stride", rc.stack.stride}};
    }

    std::vector<MetricReport> reports;
    for (const auto& r : rows)
        reports.push_back(r.second);
    const auto average = macro_average(reports);

    report["fbeta_inputs"] = rc.fbeta_inputs == FBetaInputs::Exact ? "exact" : "rounded";
    report["databases"] = std::move(dbs);
    report["macro_average"] = to_json(average);

    const std::string table = render_table(rows, average, rc.betas);
    outputs.write("report.json", report.dump(2) + "\n");
    outputs.write("table.txt", table);
    outputs.write_manifest();
    out << table;
    return kOk;
}

int cmd_sweep(const RunConfig& rc, std::ostream& out, std::ostream& err)
{
    Outputs outputs("sweep", rc);
    const auto corpus = load_corpus(rc, outputs);
    const auto grid = sweep(corpus, rc.grid, rc.betas, rc.stack, thread_budget());
    for (const auto& db : grid.skipped_databases)
        err << "warning: database '" << db << "' has no videos, skipped\n";
    std::ostringstream csv;
    write_sweep_csv(csv, grid);
    outputs.write("sweep.csv", csv.str());
    outputs.write_manifest();
    out << "swept " << grid.cells.size() << " cells over " << corpus.size() << " database(s), "
        << grid.cells.size() * grid.betas.size() << " rows written to " << (rc.out / "sweep.csv").string() << '\n';
    return kOk;
}

int cmd_tune(const RunConfig& rc, std::ostream& out, std::ostream& err)
{
    Outputs outputs("tune", rc);
    const auto corpus = load_corpus(rc, outputs);

    std::vector<double> betas = rc.betas;
    if (std::find(betas.begin(), betas.end(), rc.tune_beta) == betas.end())
        betas.push_back(rc.tune_beta);
    const auto grid = sweep(corpus, rc.grid, betas, rc.stack, thread_budget());
    for (const auto& db : grid.skipped_databases)
        err << "warning: database '" << db << "' has no videos, skipped\n";

    TuningConstraints constraints = rc.constraints;
    constraints.baseline_se_a = baseline_sensitivity(corpus, rc.stack);
    const auto optima = per_database_argmax(grid, rc.tune_beta, constraints);

    ordered_json result;
    result["beta"] = rc.tune_beta;
    auto per_db = ordered_json::array();
    auto feasibility = ordered_json::object();
    for (const auto& o : optima) {
        per_db.push_back(to_json(o));
        feasibility[o.database_id] = o.feasible();
    }
    result["per_database"] = std::move(per_db);
    result["constraints"] = to_json(constraints);
    result["feasibility"] = std::move(feasibility);

    int code = kOk;
    for (const auto& o : optima) {
        out << o.database_id << ": ";
        if (o.best)
            out << "W* = " << o.best->width.to_string() << ", T* = " << format_real(o.best->threshold) << ", "
                << beta_label(rc.tune_beta) << " = " << percent(o.f_beta()) << "%\n";
        else
            out << "no configuration satisfies the constraints\n";
    }
    try {
        const auto final_choice = average_optima(optima, rc.grid.thresholds);
        const FilterConfig chosen{FilterWidth::seconds(final_choice.width_seconds), final_choice.threshold};
        result["final"] = {{"W", final_choice.width_seconds}, {"T_pred", final_choice.threshold}};
        auto evals = ordered_json::array();
        for (const auto& db : corpus) {
            if (db.videos.empty())
                continue;
            const auto ev = evaluate_database(db, chosen, rc.stack, betas);
            evals.push_back({{"database_id", db.database_id}, {"metrics", to_json(ev.report)}});
        }
        result["final_evaluation"] = std::move(evals);
        out << "final: W = " << format_real(final_choice.width_seconds) << " s, T_pred = "
            << format_real(final_choice.threshold) << '\n';
    }
    catch (const InfeasibleError& e) {
        result["final"] = nullptr;
        err << "error: " << e.what() << '\n';
        code = kInfeasible;
    }

    std::ostringstream csv;
    write_sweep_csv(csv, grid);
    outputs.write("sweep.csv", csv.str());
    outputs.write("tuning.json", result.dump(2) + "\n");
    outputs.write_manifest();
    return code;
}

int cmd_offsets(const RunConfig& rc, std::ostream& out)
{
    Outputs outputs("offsets", rc);
    const auto corpus = load_corpus(rc, outputs);

    std::ostringstream csv;
    csv << "duration_frames,offset_frames\n";
    std::vector<FpOffsetRecord> all;
    auto per_db = ordered_json::array();
    auto summary_json = [&](const OffsetSummary& s, std::size_t n) {
        return ordered_json{{"fp_a", n},
                            {"near_fraction", to_json(s.near_fraction)},
                            {"short_fraction", to_json(s.short_fraction)}};
    };
    for (const auto& db : corpus) {
        std::vector<FpOffsetRecord> records;
        for (const auto& v : db.videos) {
            const auto ev = evaluate(v.stream, v.annotation, rc.filter, rc.stack);
            records.insert(records.end(), ev.alarms.false_alarms.begin(), ev.alarms.false_alarms.end());
        }
        for (const auto& r : records)
            csv << r.duration_frames << ',' << (r.offset_frames ? std::to_string(*r.offset_frames) : "inf") << '\n';
        const auto s = offset_histogram(records, rc.near_limit, rc.short_limit);
        auto j = summary_json(s, records.size());
        j["database_id"] = db.database_id;
        per_db.push_back(std::move(j));
        all.insert(all.end(), records.begin(), records.end());
    }
    const auto overall = offset_histogram(all, rc.near_limit, rc.short_limit);

    ordered_json result;
    result["filter"] = to_json(rc.filter);
    result["near_limit"] = rc.near_limit;
    result["short_limit"] = rc.short_limit;
    result["databases"] = std::move(per_db);
    result["overall"] = summary_json(overall, all.size());

    outputs.write("fp_offsets.csv", csv.str());
    outputs.write("offsets.json", result.dump(2) + "\n");
    outputs.write_manifest();
    out << all.size() << " false alarms; offset < " << rc.near_limit << " frames: " << percent(overall.near_fraction)
        << "%, duration < " << rc.short_limit << " frames: " << percent(overall.short_fraction) << "%\n";
    return kOk;
}

int cmd_synth(const RunConfig& rc, std::ostream& out)
{
    Outputs outputs("synth", rc);
    const auto corpus = generate(rc.synth);

    std::ostringstream ann;
    write_annotations(ann, corpus.annotations);
    std::ostringstream pred;
    write_predictions(pred, corpus.streams);
    outputs.write("annotations.jsonl", ann.str());
    outputs.write("predictions.csv", pred.str());
    outputs.write("ledger.json", ledger_json(rc.synth, corpus).dump(2) + "\n");
    outputs.write_manifest();
    out << "generated " << corpus.annotations.size() << " videos with " << corpus.planted_falls()
        << " planted falls in " << rc.out.string() << '\n';
    return kOk;
}

int cmd_folds(const RunConfig& rc, std::ostream& out)
{
    Outputs outputs("folds", rc);
    if (rc.annotations.empty())
        throw ParseError("an annotations file is required");
    const auto annotations = load_annotations(rc.annotations);
    outputs.add_input("annotations", rc.annotations);
    if (annotations.empty())
        throw ParseError("empty corpus: " + rc.annotations.string() + " has no videos");

    std::vector<GroupedVideo> videos;
    std::map<std::string, std::string> group_of;
    for (const auto& a : annotations) {
        videos.push_back({a.video_id, a.group_id});
        group_of[a.video_id] = a.group_id;
    }
    const auto folds = assign_folds(videos, rc.folds, rc.seed);

    std::ostringstream csv;
    csv << "video_id,group_id,fold\n";
    for (const auto& [video, fold] : folds.fold_of)
        csv << video << ',' << group_of[video] << ',' << fold << '\n';
    outputs.write("folds.csv", csv.str());
    outputs.write_manifest();

    std::vector<std::set<std::string>> groups(static_cast<std::size_t>(folds.k));
    for (const auto& [video, fold] : folds.fold_of)
        groups[static_cast<std::size_t>(fold)].insert(group_of[video]);
    for (int f = 0; f < folds.k; ++f)
        out << "fold " << f << ": " << groups[static_cast<std::size_t>(f)].size() << " group(s)\n";
    return kOk;
}

} // namespace

unsigned thread_budget()
{
    if (const char* env = std::getenv("ALARM_PIPELINE_THREADS")) {
        unsigned n = 0;
        const std::string_view s(env);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec == std::errc() && ptr == s.data() + s.size() && n > 0)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Fall alarm post-processing: temporal filtering, alarm evaluation and (W, T_pred) tuning",
                 kToolName};
    app.require_subcommand(1);
    Flags flags;

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate alarms against ground truth");
    auto* sweep_cmd = app.add_subcommand("sweep", "F-beta surface over (W, T_pred)");
    auto* tune_cmd = app.add_subcommand("tune", "Constrained (W, T_pred) selection");
    auto* offsets_cmd = app.add_subcommand("offsets", "False-alarm offset and duration analysis");
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
    auto* folds_cmd = app.add_subcommand("folds", "Video-grouped cross-validation folds");
    for (auto* sub : {evaluate_cmd, sweep_cmd, tune_cmd, offsets_cmd, synth_cmd, folds_cmd}) {
        sub->add_option("--config", flags.config, "JSON run configuration");
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--seed", flags.seed, "Random seed");
    }
    for (auto* sub : {evaluate_cmd, sweep_cmd, tune_cmd, offsets_cmd, folds_cmd})
        sub->add_option("--annotations", flags.annotations, "Annotation JSON Lines file");
    for (auto* sub : {evaluate_cmd, sweep_cmd, tune_cmd, offsets_cmd})
        sub->add_option("--predictions", flags.predictions, "Prediction CSV file");
    for (auto* sub : {evaluate_cmd, sweep_cmd, tune_cmd})
        sub->add_option("--beta", flags.betas, "Comma-separated F-beta list, e.g. 0.5,2");
    for (auto* sub : {sweep_cmd, tune_cmd}) {
        sub->add_option("--w-grid", flags.w_grid, "Filter widths in seconds, start:stop:step");
        sub->add_option("--t-grid", flags.t_grid, "Thresholds, start:stop:step");
    }
    for (auto* sub : {evaluate_cmd, offsets_cmd}) {
        sub->add_option("--width-seconds", flags.width_seconds, "Gate filter width in seconds");
        sub->add_option("--width-frames", flags.width_frames, "Gate filter width in frames");
        sub->add_option("--threshold", flags.threshold, "T_pred");
    }
    evaluate_cmd->add_option("--counts-only", flags.counts_only, "CSV of database_id,TP_a,FP_a,FN_a");
    evaluate_cmd->add_flag("--fbeta-rounded", flags.fbeta_rounded,
                           "Derive F-beta from p_a and se_a rounded to 0.1 percent");
    folds_cmd->add_option("--k", flags.folds, "Fold count");

    std::vector<std::string> argv_storage;
    argv_storage.push_back(kToolName);
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage)
        argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kParseError;
    }

    try {
        const RunConfig rc = resolve(flags);
        if (evaluate_cmd->parsed())
            return cmd_evaluate(rc, out);
        if (sweep_cmd->parsed())
            return cmd_sweep(rc, out, err);
        if (tune_cmd->parsed())
            return cmd_tune(rc, out, err);
        if (offsets_cmd->parsed())
            return cmd_offsets(rc, out);
        if (synth_cmd->parsed())
            return cmd_synth(rc, out);
        return cmd_folds(rc, out);
    }
    catch (const InfeasibleError& e) {
        err << "error: " << e.what() << '\n';
        return kInfeasible;
    }
    catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kParseError;
    }
}

} // namespace alarm_pipeline::cli
