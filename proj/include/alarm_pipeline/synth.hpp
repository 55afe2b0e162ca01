#pragma once

#include "alarm_pipeline/corpus.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace alarm_pipeline {

/// Uniform integer durations in [mean - spread, mean + spread], floored at 1.
struct DurationDist {
    Frame mean = 32;
    Frame spread = 8;
};

/// Parameters for one synthetic database. Anchors advance one frame per stack.
struct SynthSpec {
    std::string database_id = "synthetic";
    int video_count = 10;
    double fps = 30.0;
    Frame frames_per_video = 900;
    /// Mean falls per video; the fractional part is drawn per video.
    double fall_rate = 1.0;
    DurationDist fall_duration{32, 8};
    /// Uniform score jitter amplitude.
    double score_noise = 0.0;
    /// Expected dips next to each fall, in [0, 2]; at most one per side.
    double near_fall_fp_rate = 0.0;
    /// Expected dips per video planted away from any fall.
    double far_fp_rate = 0.0;
    DurationDist fp_duration{5, 4};
    /// Near dips sit 1..near_offset_max frames from their fall.
    Frame near_offset_max = 4;
    /// Minimum distance in frames between unrelated planted events, and the
    /// quiet lead-in before the first one.
    Frame far_offset_min = 30;
    double fall_level = 0.0;
    double background_level = 1.0;
    double dip_level = 0.1;
    int stack_length = 10;
    /// Consecutive videos sharing a parent group id.
    int group_size = 1;
    std::uint64_t seed = 1;
};

void validate(const SynthSpec& spec);

enum class PlantedKind { Fall, NearDip, FarDip };

const char* to_string(PlantedKind kind);

struct PlantedEvent {
    std::string video_id;
    PlantedKind kind = PlantedKind::Fall;
    /// Fall frames for a fall; the run of anchor frames for a dip.
    FrameInterval frames;
    Frame duration_frames = 0;
    /// Dips only: distance from the dip's covered frames to the nearest fall.
    std::optional<Frame> offset_frames;
};

struct SynthCorpus {
    std::vector<VideoAnnotation> annotations;
    std::vector<PredictionStream> streams;
    std::vector<PlantedEvent> ledger;

    std::size_t planted_falls() const;
};

/// Deterministic per (seed, video index). Throws InfeasibleError when the
/// planted events do not fit in a video.
SynthCorpus generate(const SynthSpec& spec);
SynthCorpus generate(std::span<const SynthSpec> specs);

/// Three databases shaped like URFD, FDD and Multicam (frame rates, mean fall
/// durations and 30/99/200 falls) with short dips near and away from falls.
std::vector<SynthSpec> default_synthetic_corpus(std::uint64_t seed);

nlohmann::ordered_json to_json(const SynthSpec& spec);
/// Missing keys keep their defaults.
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json ledger_json(std::span<const SynthSpec> specs, const SynthCorpus& corpus);

} // namespace alarm_pipeline
