#pragma once

#include "alarm_pipeline/corpus.hpp"
#include "alarm_pipeline/metrics.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace alarm_pipeline {

/// Gate filter width, given either in seconds or directly in frames.
class FilterWidth {
public:
    enum class Unit { Frames, Seconds };

    static FilterWidth seconds(double s);
    static FilterWidth frames(std::int64_t n);

    Unit unit() const { return unit_; }
    double value() const { return value_; }
    std::int64_t to_frames(double fps) const;

    std::string to_string() const;

    friend bool operator==(const FilterWidth&, const FilterWidth&) = default;
    /// Frames-unit widths order before seconds-unit widths, then by value.
    friend bool operator<(const FilterWidth& a, const FilterWidth& b);

private:
    FilterWidth(Unit unit, double value) : unit_(unit), value_(value) {}

    Unit unit_ = Unit::Frames;
    double value_ = 1.0;
};

struct FilterConfig {
    FilterWidth width = FilterWidth::frames(1);
    /// Filtered scores strictly below this are Fall.
    double threshold = 0.5;
};

void validate(const FilterConfig& config);

/// round(seconds * fps), at least 1.
std::int64_t width_to_frames(double seconds, double fps);

/// Trailing box filter: element i is the mean of inputs [i - width + 1, i],
/// with shorter windows at the start of the stream.
std::vector<double> gate_filter(std::span<const double> scores, std::int64_t width);

enum class Prediction : unsigned char { NoFall, Fall };

std::vector<Prediction> threshold_labels(std::span<const double> filtered, double threshold);

/// Maximal run of Fall predictions, by first and last anchor frame.
struct AnchorRun {
    Frame first_anchor = 0;
    Frame last_anchor = 0;

    friend bool operator==(const AnchorRun&, const AnchorRun&) = default;
};

std::vector<AnchorRun> extract_alarms(std::span<const Prediction> labels, std::span<const Frame> anchors);

enum class AlarmKind { TruePositive, FalsePositive };

const char* to_string(AlarmKind kind);

struct AlarmEvent {
    Frame start_frame = 0;
    Frame end_frame = 0;
    AlarmKind kind = AlarmKind::FalsePositive;
    /// Frames from the alarm's covered span to the nearest fall; 0 for true
    /// alarms, empty for a false alarm in a video without falls.
    std::optional<Frame> offset_frames;
};

struct FpOffsetRecord {
    Frame duration_frames = 1;
    /// Empty means infinitely far (the video has no fall).
    std::optional<Frame> offset_frames;

    friend bool operator==(const FpOffsetRecord&, const FpOffsetRecord&) = default;
};

struct AlarmMatch {
    AlarmCounts counts;
    std::vector<AlarmEvent> alarms;
    std::vector<FpOffsetRecord> false_alarms;
};

/// Classifies alarm runs against ground-truth fall intervals. A run covers
/// frames [first_anchor - (L - 1), last_anchor]; a fall is detected when any
/// run's covered frames overlap it. Each detected fall is one TP_a however
/// many runs hit it; runs overlapping no fall are FP_a.
AlarmMatch match_alarms(std::span<const AnchorRun> alarms,
                        std::span<const FrameInterval> truth,
                        int stack_length);

struct OffsetSummary {
    Metric near_fraction;
    Metric short_fraction;
    std::vector<FpOffsetRecord> points;
};

/// Fraction of false alarms with offset < near_limit frames and with duration
/// < short_limit frames.
OffsetSummary offset_histogram(std::span<const FpOffsetRecord> records,
                               Frame near_limit = 5,
                               Frame short_limit = 10);

struct VideoEvaluation {
    std::string video_id;
    /// Transition stacks excluded.
    ConfusionCounts stack;
    AlarmMatch alarms;
};

/// gate_filter -> threshold_labels -> extract_alarms -> match_alarms for one
/// video, plus stack-level confusion against label_stack. Throws InputError
/// when ids differ or an anchor's span leaves the video.
VideoEvaluation evaluate(const PredictionStream& stream,
                         const VideoAnnotation& annotation,
                         const FilterConfig& filter,
                         const StackConfig& stack);

/// Like evaluate, reusing an already filtered score sequence.
VideoEvaluation evaluate_filtered(const PredictionStream& stream,
                                  std::span<const double> filtered,
                                  const VideoAnnotation& annotation,
                                  double threshold,
                                  const StackConfig& stack);

struct DatabaseEvaluation {
    std::string database_id;
    MetricReport report;
    std::vector<VideoEvaluation> videos;
};

DatabaseEvaluation evaluate_database(const Database& database,
                                     const FilterConfig& filter,
                                     const StackConfig& stack,
                                     std::span<const double> betas);

nlohmann::ordered_json to_json(const AlarmEvent& alarm);
nlohmann::ordered_json to_json(const FilterConfig& config);
nlohmann::ordered_json to_json(const DatabaseEvaluation& evaluation);

} // namespace alarm_pipeline
