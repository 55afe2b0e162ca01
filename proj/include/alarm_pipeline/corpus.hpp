#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace alarm_pipeline {

using Frame = std::int64_t;

/// Closed frame interval [start, end].
struct FrameInterval {
    Frame start = 0;
    Frame end = 0;

    Frame length() const { return end - start + 1; }
    bool contains(Frame f) const { return start <= f && f <= end; }
    bool overlaps(const FrameInterval& o) const { return start <= o.end && o.start <= end; }

    friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

/// Ground truth for one video. Frames outside every fall interval are
/// pre-fall, post-fall or daily-life activity and all count as No-Fall.
struct VideoAnnotation {
    std::string video_id;
    std::string database_id;
    /// Parent sequence; videos derived from the same recording share it.
    std::string group_id;
    double fps = 30.0;
    Frame frame_count = 0;
    std::vector<FrameInterval> fall_intervals;

    friend bool operator==(const VideoAnnotation&, const VideoAnnotation&) = default;
};

/// Throws InputError naming the violated invariant.
void validate(const VideoAnnotation& annotation);

struct StackConfig {
    /// Consecutive optical-flow pairs per classifier input.
    int stack_length = 10;
    /// Frames between consecutive stack anchors.
    int stride = 1;

    /// Causal anchoring: the stack anchored at `anchor` covers [anchor - (L - 1), anchor].
    FrameInterval span(Frame anchor) const { return {anchor - (stack_length - 1), anchor}; }
};

void validate(const StackConfig& config);

struct StackScore {
    Frame anchor = 0;
    /// Classifier No-Fall probability; low means fall.
    double score = 1.0;

    friend bool operator==(const StackScore&, const StackScore&) = default;
};

struct PredictionStream {
    std::string video_id;
    std::vector<StackScore> scores;

    std::vector<double> values() const;
    std::vector<Frame> anchors() const;

    friend bool operator==(const PredictionStream&, const PredictionStream&) = default;
};

void validate(const PredictionStream& stream);

enum class StackLabel { Fall, NoFall, Transition };

const char* to_string(StackLabel label);

/// Fall iff every frame of the stack span lies in a fall interval, NoFall iff
/// none does, Transition otherwise. Throws std::out_of_range when the span
/// leaves [0, frame_count).
StackLabel label_stack(const VideoAnnotation& annotation, Frame anchor, const StackConfig& config);

struct GroupedVideo {
    std::string video_id;
    std::string group_id;
};

struct FoldAssignment {
    int k = 5;
    std::uint64_t seed = 0;
    std::map<std::string, int> fold_of;

    /// Video ids per fold, each list sorted.
    std::vector<std::vector<std::string>> folds() const;
};

/// Shuffles parent groups with the seeded generator and deals them round-robin
/// over k folds, so fold sizes differ by at most one group. Throws
/// InfeasibleError when there are fewer groups than folds.
FoldAssignment assign_folds(std::span<const GroupedVideo> videos, int k, std::uint64_t seed);

/// An annotation paired with its score stream.
struct LabeledVideo {
    VideoAnnotation annotation;
    PredictionStream stream;
};

struct Database {
    std::string database_id;
    std::vector<LabeledVideo> videos;

    std::size_t fall_count() const;
};

/// Pairs annotations with streams by video id and groups them per database,
/// ordered by database id then video id. Throws InputError on a missing or
/// duplicated pairing.
std::vector<Database> pair_corpus(std::span<const VideoAnnotation> annotations,
                                  std::span<const PredictionStream> streams);

} // namespace alarm_pipeline
