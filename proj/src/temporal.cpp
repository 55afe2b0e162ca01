#include "alarm_pipeline/temporal.hpp"

#include "alarm_pipeline/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>

namespace alarm_pipeline {

FilterWidth FilterWidth::seconds(double s)
{
    if (!(s > 0.0) || !std::isfinite(s))
        throw InputError("filter width in seconds must be positive");
    return FilterWidth(Unit::Seconds, s);
}

FilterWidth FilterWidth::frames(std::int64_t n)
{
    if (n < 1)
        throw InputError("filter width in frames must be >= 1");
    return FilterWidth(Unit::Frames, static_cast<double>(n));
}

std::int64_t FilterWidth::to_frames(double fps) const
{
    if (unit_ == Unit::Frames)
        return static_cast<std::int64_t>(value_);
    return width_to_frames(value_, fps);
}

std::string FilterWidth::to_string() const
{
    char buf[48];
    if (unit_ == Unit::Frames)
        std::snprintf(buf, sizeof buf, "%lld frames", static_cast<long long>(value_));
    else
        std::snprintf(buf, sizeof buf, "%g s", value_);
    return buf;
}

bool operator<(const FilterWidth& a, const FilterWidth& b)
{
    if (a.unit_ != b.unit_)
        return a.unit_ == FilterWidth::Unit::Frames;
    return a.value_ < b.value_;
}

void validate(const FilterConfig& config)
{
    if (!(config.threshold > 0.0 && config.threshold < 1.0))
        throw InputError("T_pred must lie in (0, 1)");
}

std::int64_t width_to_frames(double seconds, double fps)
{
    if (!(seconds > 0.0) || !(fps > 0.0))
        throw InputError("width and fps must be positive");
    return std::max<std::int64_t>(1, std::llround(seconds * fps));
}

std::vector<double> gate_filter(std::span<const double> scores, std::int64_t width)
{
    if (width < 1)
        throw std::invalid_argument("gate filter width must be >= 1");
    const auto n = scores.size();
    const auto w = static_cast<std::size_t>(width);
    std::vector<double> out(n);

    // Running sum for the mean; monotone deques track the window extremes so
    // rounding never pushes an output outside the range of its inputs.
    double sum = 0.0;
    std::deque<std::size_t> lo;
    std::deque<std::size_t> hi;
    for (std::size_t i = 0; i < n; ++i) {
        sum += scores[i];
        if (i >= w)
            sum -= scores[i - w];

        while (!lo.empty() && scores[lo.back()] >= scores[i])
            lo.pop_back();
        lo.push_back(i);
        while (!hi.empty() && scores[hi.back()] <= scores[i])
            hi.pop_back();
        hi.push_back(i);
        if (lo.front() + w <= i)
            lo.pop_front();
        if (hi.front() + w <= i)
            hi.pop_front();

        const auto count = std::min(i + 1, w);
        out[i] = std::clamp(sum / static_cast<double>(count), scores[lo.front()], scores[hi.front()]);
    }
    return out;
}

std::vector<Prediction> threshold_labels(std::span<const double> filtered, double threshold)
{
    std::vector<Prediction> labels;
    labels.reserve(filtered.size());
    for (double v : filtered)
        labels.push_back(v < threshold ? Prediction::Fall : Prediction::NoFall);
    return labels;
}

std::vector<AnchorRun> extract_alarms(std::span<const Prediction> labels, std::span<const Frame> anchors)
{
    if (labels.size() != anchors.size())
        throw std::invalid_argument("labels and anchors differ in length");
    std::vector<AnchorRun> runs;
    bool open = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == Prediction::Fall) {
            if (!open)
                runs.push_back({anchors[i], anchors[i]});
            runs.back().last_anchor = anchors[i];
            open = true;
        }
        else {
            open = false;
        }
    }
    return runs;
}

const char* to_string(AlarmKind kind)
{
    return kind == AlarmKind::TruePositive ? "TP_a" : "FP_a";
}

AlarmMatch match_alarms(std::span<const AnchorRun> alarms, std::span<const FrameInterval> truth, int stack_length)
{
    if (stack_length < 1)
        throw std::invalid_argument("stack_length must be >= 1");

    AlarmMatch result;
    std::vector<bool> detected(truth.size(), false);

    for (const auto& run : alarms) {
        const FrameInterval covered{run.first_anchor - (stack_length - 1), run.last_anchor};

        // First fall that does not end before the covered span.
        const auto first = std::lower_bound(truth.begin(), truth.end(), covered.start,
                                            [](const FrameInterval& iv, Frame f) { return iv.end < f; });
        bool hit = false;
        for (auto it = first; it != truth.end() && it->start <= covered.end; ++it) {
            detected[static_cast<std::size_t>(it - truth.begin())] = true;
            hit = true;
        }

        AlarmEvent event{run.first_anchor, run.last_anchor, AlarmKind::TruePositive, Frame{0}};
        if (!hit) {
            std::optional<Frame> offset;
            if (first != truth.end())
                offset = first->start - covered.end;
            if (first != truth.begin()) {
                const Frame before = covered.start - std::prev(first)->end;
                offset = offset ? std::min(*offset, before) : before;
            }
            event.kind = AlarmKind::FalsePositive;
            event.offset_frames = offset;
            result.false_alarms.push_back({run.last_anchor - run.first_anchor + 1, offset});
            ++result.counts.fp;
        }
        result.alarms.push_back(event);
    }

    result.counts.tp = std::count(detected.begin(), detected.end(), true);
    result.counts.fn = static_cast<std::int64_t>(truth.size()) - result.counts.tp;
    return result;
}

OffsetSummary offset_histogram(std::span<const FpOffsetRecord> records, Frame near_limit, Frame short_limit)
{
    OffsetSummary s;
    s.points.assign(records.begin(), records.end());
    if (records.empty())
        return s;
    std::size_t near = 0;
    std::size_t brief = 0;
    for (const auto& r : records) {
        if (r.offset_frames && *r.offset_frames < near_limit)
            ++near;
        if (r.duration_frames < short_limit)
            ++brief;
    }
    const auto n = static_cast<double>(records.size());
    s.near_fraction = static_cast<double>(near) / n;
    s.short_fraction = static_cast<double>(brief) / n;
    return s;
}

VideoEvaluation evaluate_filtered(const PredictionStream& stream,
                                  std::span<const double> filtered,
                                  const VideoAnnotation& annotation,
                                  double threshold,
                                  const StackConfig& stack)
{
    if (stream.video_id != annotation.video_id)
        throw InputError("stream '" + stream.video_id + "' evaluated against annotation '" + annotation.video_id +
                         "'");
    if (filtered.size() != stream.scores.size())
        throw std::invalid_argument("filtered scores differ in length from the stream");

    const auto labels = threshold_labels(filtered, threshold);
    const auto anchors = stream.anchors();

    VideoEvaluation ev;
    ev.video_id = stream.video_id;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        StackLabel truth;
        try {
            truth = label_stack(annotation, anchors[i], stack);
        }
        catch (const std::out_of_range& e) {
            throw InputError(e.what());
        }
        if (truth == StackLabel::Transition)
            continue;
        const bool predicted_fall = labels[i] == Prediction::Fall;
        const bool actual_fall = truth == StackLabel::Fall;
        if (predicted_fall && actual_fall)
            ++ev.stack.tp;
        else if (predicted_fall)
            ++ev.stack.fp;
        else if (actual_fall)
            ++ev.stack.fn;
        else
            ++ev.stack.tn;
    }

    const auto runs = extract_alarms(labels, anchors);
    ev.alarms = match_alarms(runs, annotation.fall_intervals, stack.stack_length);
    return ev;
}

VideoEvaluation evaluate(const PredictionStream& stream,
                         const VideoAnnotation& annotation,
                         const FilterConfig& filter,
                         const StackConfig& stack)
{
    validate(filter);
    validate(stack);
    const auto values = stream.values();
    const auto filtered = gate_filter(values, filter.width.to_frames(annotation.fps));
    return evaluate_filtered(stream, filtered, annotation, filter.threshold, stack);
}

DatabaseEvaluation evaluate_database(const Database& database,
                                     const FilterConfig& filter,
                                     const StackConfig& stack,
                                     std::span<const double> betas)
{
    DatabaseEvaluation out;
    out.database_id = database.database_id;
    ConfusionCounts stack_counts;
    AlarmCounts alarm_counts;
    for (const auto& video : database.videos) {
        auto ev = evaluate(video.stream, video.annotation, filter, stack);
        stack_counts += ev.stack;
        alarm_counts += ev.alarms.counts;
        out.videos.push_back(std::move(ev));
    }
    out.report = make_report(stack_counts, alarm_counts, betas);
    return out;
}

nlohmann::ordered_json to_json(const AlarmEvent& alarm)
{
    nlohmann::ordered_json j;
    j["start"] = alarm.start_frame;
    j["end"] = alarm.end_frame;
    j["kind"] = to_string(alarm.kind);
    // null: false alarm in a video without any fall (infinite offset).
    j["offset"] = alarm.offset_frames ? nlohmann::ordered_json(*alarm.offset_frames) : nlohmann::ordered_json();
    return j;
}

nlohmann::ordered_json to_json(const FilterConfig& config)
{
    nlohmann::ordered_json j;
    if (config.width.unit() == FilterWidth::Unit::Seconds)
        j["width_seconds"] = config.width.value();
    else
        j["width_frames"] = static_cast<std::int64_t>(config.width.value());
    j["threshold"] = config.threshold;
    return j;
}

nlohmann::ordered_json to_json(const DatabaseEvaluation& evaluation)
{
    nlohmann::ordered_json j;
    j["database_id"] = evaluation.database_id;
    j["metrics"] = to_json(evaluation.report);
    auto videos = nlohmann::ordered_json::array();
    for (const auto& v : evaluation.videos) {
        nlohmann::ordered_json vj;
        vj["video_id"] = v.video_id;
        vj["alarm_counts"] = {{"TP_a", v.alarms.counts.tp}, {"FP_a", v.alarms.counts.fp}, {"FN_a", v.alarms.counts.fn}};
        auto alarms = nlohmann::ordered_json::array();
        for (const auto& a : v.alarms.alarms)
            alarms.push_back(to_json(a));
        vj["alarms"] = std::move(alarms);
        videos.push_back(std::move(vj));
    }
    j["videos"] = std::move(videos);
    return j;
}

} // namespace alarm_pipeline
