#include "alarm_pipeline/corpus.hpp"

#include "alarm_pipeline/error.hpp"
#include "alarm_pipeline/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace alarm_pipeline {

void validate(const VideoAnnotation& a)
{
    auto fail = [&](const std::string& what) {
        throw InputError("video '" + a.video_id + "': " + what);
    };
    if (a.video_id.empty())
        throw InputError("annotation with empty video_id");
    if (!(a.fps > 0.0) || !std::isfinite(a.fps))
        fail("fps must be positive");
    if (a.frame_count < 0)
        fail("negative frame_count");
    for (std::size_t i = 0; i < a.fall_intervals.size(); ++i) {
        const auto& iv = a.fall_intervals[i];
        if (iv.start < 0 || iv.start > iv.end || iv.end >= a.frame_count)
            fail("fall interval [" + std::to_string(iv.start) + ", " + std::to_string(iv.end) +
                 "] outside 0 <= start <= end < frame_count");
        if (i > 0 && a.fall_intervals[i - 1].end >= iv.start)
            fail("fall intervals overlap or are not sorted");
    }
}

void validate(const StackConfig& config)
{
    if (config.stack_length < 1)
        throw InputError("stack_length must be >= 1");
    if (config.stride < 1)
        throw InputError("stride must be >= 1");
}

std::vector<double> PredictionStream::values() const
{
    std::vector<double> v;
    v.reserve(scores.size());
    for (const auto& s : scores)
        v.push_back(s.score);
    return v;
}

std::vector<Frame> PredictionStream::anchors() const
{
    std::vector<Frame> v;
    v.reserve(scores.size());
    for (const auto& s : scores)
        v.push_back(s.anchor);
    return v;
}

void validate(const PredictionStream& stream)
{
    for (std::size_t i = 0; i < stream.scores.size(); ++i) {
        const auto& s = stream.scores[i];
        if (!(s.score >= 0.0 && s.score <= 1.0))
            throw InputError("video '" + stream.video_id + "': score outside [0, 1] at anchor " +
                             std::to_string(s.anchor));
        if (i > 0 && stream.scores[i - 1].anchor >= s.anchor)
            throw InputError("video '" + stream.video_id + "': anchors not strictly increasing at anchor " +
                             std::to_string(s.anchor));
    }
}

const char* to_string(StackLabel label)
{
    switch (label) {
    case StackLabel::Fall:
        return "Fall";
    case StackLabel::NoFall:
        return "NoFall";
    case StackLabel::Transition:
        return "Transition";
    }
    return "?";
}

StackLabel label_stack(const VideoAnnotation& annotation, Frame anchor, const StackConfig& config)
{
    const FrameInterval span = config.span(anchor);
    if (span.start < 0 || span.end >= annotation.frame_count)
        throw std::out_of_range("stack span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                                "] outside video '" + annotation.video_id + "'");

    Frame inside = 0;
    for (const auto& iv : annotation.fall_intervals) {
        if (!iv.overlaps(span))
            continue;
        inside += std::min(iv.end, span.end) - std::max(iv.start, span.start) + 1;
    }
    if (inside == span.length())
        return StackLabel::Fall;
    if (inside == 0)
        return StackLabel::NoFall;
    return StackLabel::Transition;
}

std::vector<std::vector<std::string>> FoldAssignment::folds() const
{
    std::vector<std::vector<std::string>> out(static_cast<std::size_t>(k));
    for (const auto& [video, fold] : fold_of)
        out[static_cast<std::size_t>(fold)].push_back(video);
    return out;
}

FoldAssignment assign_folds(std::span<const GroupedVideo> videos, int k, std::uint64_t seed)
{
    if (k < 2)
        throw InputError("fold count must be >= 2");

    std::set<std::string> group_set;
    for (const auto& v : videos)
        group_set.insert(v.group_id.empty() ? v.video_id : v.group_id);
    if (group_set.size() < static_cast<std::size_t>(k))
        throw InfeasibleError(std::to_string(group_set.size()) + " parent groups cannot fill " +
                              std::to_string(k) + " folds");

    // Sorted before shuffling so the result is independent of input order.
    std::vector<std::string> groups(group_set.begin(), group_set.end());
    PortableRng rng(seed);
    rng.shuffle(groups);

    std::map<std::string, int> fold_of_group;
    for (std::size_t i = 0; i < groups.size(); ++i)
        fold_of_group[groups[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

    FoldAssignment result;
    result.k = k;
    result.seed = seed;
    for (const auto& v : videos) {
        const int fold = fold_of_group.at(v.group_id.empty() ? v.video_id : v.group_id);
        auto [it, inserted] = result.fold_of.emplace(v.video_id, fold);
        if (!inserted && it->second != fold)
            throw InputError("video '" + v.video_id + "' listed under two groups");
    }
    return result;
}

std::size_t Database::fall_count() const
{
    std::size_t n = 0;
    for (const auto& v : videos)
        n += v.annotation.fall_intervals.size();
    return n;
}

std::vector<Database> pair_corpus(std::span<const VideoAnnotation> annotations,
                                  std::span<const PredictionStream> streams)
{
    std::map<std::string, const PredictionStream*> by_id;
    for (const auto& s : streams) {
        if (!by_id.emplace(s.video_id, &s).second)
            throw InputError("duplicate prediction stream for video '" + s.video_id + "'");
    }

    std::map<std::string, Database> databases;
    std::set<std::string> seen;
    for (const auto& a : annotations) {
        if (!seen.insert(a.video_id).second)
            throw InputError("duplicate annotation for video '" + a.video_id + "'");
        auto it = by_id.find(a.video_id);
        if (it == by_id.end())
            throw InputError("no predictions for video '" + a.video_id + "'");
        auto& db = databases[a.database_id];
        db.database_id = a.database_id;
        db.videos.push_back({a, *it->second});
    }
    for (const auto& s : streams) {
        if (!seen.contains(s.video_id))
            throw InputError("predictions for unannotated video '" + s.video_id + "'");
    }

    std::vector<Database> out;
    for (auto& [id, db] : databases) {
        std::sort(db.videos.begin(), db.videos.end(), [](const LabeledVideo& x, const LabeledVideo& y) {
            return x.annotation.video_id < y.annotation.video_id;
        });
        out.push_back(std::move(db));
    }
    return out;
}

} // namespace alarm_pipeline
