#pragma once

// Brute-force reference implementations used only by tests. They work frame
// by frame and share no code with the library's algorithms.

#include "alarm_pipeline/corpus.hpp"
#include "alarm_pipeline/metrics.hpp"
#include "alarm_pipeline/temporal.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

using alarm_pipeline::Frame;
using alarm_pipeline::FrameInterval;

inline std::vector<double> naive_gate(const std::vector<double>& x, std::size_t width)
{
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t lo = i + 1 >= width ? i + 1 - width : 0;
        double s = 0.0;
        for (std::size_t j = lo; j <= i; ++j)
            s += x[j];
        y[i] = s / static_cast<double>(i - lo + 1);
    }
    return y;
}

struct Run {
    Frame first;
    Frame last;
};

/// Runs found by checking every pair (i, j) for a maximal all-Fall stretch.
inline std::vector<Run> naive_runs(const std::vector<bool>& fall, const std::vector<Frame>& anchors)
{
    std::vector<Run> runs;
    const std::size_t n = fall.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            bool all = true;
            for (std::size_t k = i; k <= j; ++k)
                all = all && fall[k];
            const bool left_closed = i == 0 || !fall[i - 1];
            const bool right_closed = j + 1 == n || !fall[j + 1];
            if (all && left_closed && right_closed)
                runs.push_back({anchors[i], anchors[j]});
        }
    }
    return runs;
}

struct Match {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    /// (duration, offset or -1 for none) per false alarm, in run order.
    std::vector<std::pair<Frame, Frame>> false_alarms;
};

/// Enumerates every frame of every run and every fall.
inline Match naive_match(const std::vector<Run>& runs, const std::vector<FrameInterval>& falls, int stack_length)
{
    Match m;
    std::vector<bool> detected(falls.size(), false);
    for (const auto& r : runs) {
        bool hit = false;
        Frame best = std::numeric_limits<Frame>::max();
        for (Frame f = r.first - (stack_length - 1); f <= r.last; ++f) {
            for (std::size_t k = 0; k < falls.size(); ++k) {
                for (Frame g = falls[k].start; g <= falls[k].end; ++g) {
                    if (f == g) {
                        detected[k] = true;
                        hit = true;
                    }
                    best = std::min(best, f > g ? f - g : g - f);
                }
            }
        }
        if (!hit) {
            ++m.fp;
            m.false_alarms.push_back({r.last - r.first + 1, falls.empty() ? -1 : best});
        }
    }
    for (bool d : detected)
        (d ? m.tp : m.fn) += 1;
    return m;
}

enum class Truth { Fall, NoFall, Transition };

inline Truth naive_label(const alarm_pipeline::VideoAnnotation& a, Frame anchor, int L)
{
    int inside = 0;
    for (Frame f = anchor - L + 1; f <= anchor; ++f) {
        for (const auto& iv : a.fall_intervals) {
            if (iv.start <= f && f <= iv.end)
                ++inside;
        }
    }
    if (inside == L)
        return Truth::Fall;
    return inside == 0 ? Truth::NoFall : Truth::Transition;
}

struct VideoResult {
    alarm_pipeline::ConfusionCounts stack;
    Match alarms;
};

/// Second end-to-end implementation of per-video evaluation.
inline VideoResult naive_evaluate(const alarm_pipeline::PredictionStream& stream,
                                  const alarm_pipeline::VideoAnnotation& a,
                                  std::size_t width_frames,
                                  double threshold,
                                  int L)
{
    std::vector<double> x;
    std::vector<Frame> anchors;
    for (const auto& s : stream.scores) {
        x.push_back(s.score);
        anchors.push_back(s.anchor);
    }
    const auto y = naive_gate(x, width_frames);
    std::vector<bool> fall;
    for (double v : y)
        fall.push_back(v < threshold);

    VideoResult r;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const Truth t = naive_label(a, anchors[i], L);
        if (t == Truth::Transition)
            continue;
        if (fall[i])
            (t == Truth::Fall ? r.stack.tp : r.stack.fp) += 1;
        else
            (t == Truth::Fall ? r.stack.fn : r.stack.tn) += 1;
    }

    // Run finding here is linear; naive_runs is too slow for long videos.
    std::vector<Run> runs;
    for (std::size_t i = 0; i < fall.size(); ++i) {
        if (!fall[i])
            continue;
        if (i == 0 || !fall[i - 1])
            runs.push_back({anchors[i], anchors[i]});
        runs.back().last = anchors[i];
    }
    r.alarms = naive_match(runs, a.fall_intervals, L);
    return r;
}

/// Confusion matrix by direct tally over (predicted, actual) pairs.
inline alarm_pipeline::ConfusionCounts tally(const std::vector<bool>& predicted, const std::vector<bool>& actual)
{
    alarm_pipeline::ConfusionCounts c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] && actual[i])
            ++c.tp;
        else if (predicted[i])
            ++c.fp;
        else if (actual[i])
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

} // namespace oracle
