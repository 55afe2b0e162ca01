#pragma once

#include "alarm_pipeline/corpus.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace alarm_pipeline {

// Annotation files are JSON Lines, one video per line:
//   {"video_id", "database_id", "fps", "frame_count", "fall_intervals": [[s,e],...], "group_id"}
// Prediction files are CSV with header `video_id,anchor_frame,score`.
// Every loaded record is validated; failures raise ParseError with the line number.

std::vector<VideoAnnotation> read_annotations(std::istream& in);
std::vector<VideoAnnotation> load_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out, const std::vector<VideoAnnotation>& annotations);
void save_annotations(const std::filesystem::path& path, const std::vector<VideoAnnotation>& annotations);

/// Rows of one video need not be contiguous, but their anchors must increase.
std::vector<PredictionStream> read_predictions(std::istream& in);
std::vector<PredictionStream> load_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const std::vector<PredictionStream>& streams);
void save_predictions(const std::filesystem::path& path, const std::vector<PredictionStream>& streams);

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

} // namespace alarm_pipeline
