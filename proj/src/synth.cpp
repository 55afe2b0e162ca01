#include "alarm_pipeline/synth.hpp"

#include "alarm_pipeline/error.hpp"
#include "alarm_pipeline/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace alarm_pipeline {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t video_seed(std::uint64_t seed, std::uint64_t index)
{
    return splitmix64(splitmix64(seed) ^ index);
}

Frame draw(PortableRng& rng, const DurationDist& d)
{
    return rng.between(std::max<Frame>(1, d.mean - d.spread), std::max<Frame>(1, d.mean + d.spread));
}

/// floor(rate) events plus one more with probability frac(rate).
int draw_count(PortableRng& rng, double rate)
{
    const double whole = std::floor(rate);
    return static_cast<int>(whole) + (rng.bernoulli(rate - whole) ? 1 : 0);
}

std::string numbered(const std::string& prefix, long long n)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld", n);
    return prefix + buf;
}

struct NearDip {
    Frame length = 0;
    Frame offset = 0;
};

/// A fall with its optional neighbouring dips, or a lone far dip.
struct Item {
    bool fall = false;
    Frame length = 0;
    std::optional<NearDip> before;
    std::optional<NearDip> after;

    /// Anchors touched by the item, relative to its first anchor.
    Frame width(Frame L) const
    {
        if (!fall)
            return length;
        Frame w = (before ? before->length - 1 + before->offset : 0) + length + L - 1;
        if (after)
            w += after->offset + after->length - 1;
        return w;
    }
};

struct Placed {
    std::vector<FrameInterval> falls;
    std::vector<std::pair<FrameInterval, PlantedKind>> dips;
};

void generate_video(const SynthSpec& spec, long long index, SynthCorpus& out)
{
    PortableRng rng(video_seed(spec.seed, static_cast<std::uint64_t>(index)));
    const Frame L = spec.stack_length;
    const Frame F = spec.frames_per_video;
    const Frame gap = spec.far_offset_min;

    std::vector<Item> items;
    const int falls = draw_count(rng, spec.fall_rate);
    for (int i = 0; i < falls; ++i) {
        Item it;
        it.fall = true;
        it.length = draw(rng, spec.fall_duration);
        if (rng.bernoulli(spec.near_fall_fp_rate / 2))
            it.before = NearDip{draw(rng, spec.fp_duration), rng.between(1, spec.near_offset_max)};
        if (rng.bernoulli(spec.near_fall_fp_rate / 2))
            it.after = NearDip{draw(rng, spec.fp_duration), rng.between(1, spec.near_offset_max)};
        items.push_back(it);
    }
    const int far = draw_count(rng, spec.far_fp_rate);
    for (int i = 0; i < far; ++i)
        items.push_back(Item{false, draw(rng, spec.fp_duration), std::nullopt, std::nullopt});
    rng.shuffle(items);

    VideoAnnotation ann;
    ann.video_id = numbered(spec.database_id + "_v", index);
    ann.database_id = spec.database_id;
    ann.group_id = numbered(spec.database_id + "_g", index / spec.group_size);
    ann.fps = spec.fps;
    ann.frame_count = F;

    // Anchors start at L - 1 and the first `gap` of them stay quiet, so no
    // event lands in the filter's warm-up. Consecutive items keep `gap`
    // anchors apart; the remaining slack is spread over the n + 1 slots.
    Frame required = L - 1 + gap;
    for (const auto& it : items)
        required += it.width(L);
    if (!items.empty())
        required += static_cast<Frame>(items.size() - 1) * gap;
    if (required > F)
        throw InfeasibleError("video " + ann.video_id + " needs " + std::to_string(required) +
                              " frames for its planted events but has " + std::to_string(F));

    const Frame slack = F - required;
    std::vector<Frame> cuts;
    for (std::size_t i = 0; i < items.size(); ++i)
        cuts.push_back(rng.between(0, slack));
    std::sort(cuts.begin(), cuts.end());

    Placed placed;
    Frame cursor = L - 1 + gap;
    Frame previous_cut = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        cursor += cuts[i] - previous_cut;
        previous_cut = cuts[i];
        const Item& it = items[i];
        Frame u = cursor;
        if (!it.fall) {
            placed.dips.push_back({{u, u + it.length - 1}, PlantedKind::FarDip});
        }
        else {
            if (it.before) {
                const FrameInterval dip{u, u + it.before->length - 1};
                placed.dips.push_back({dip, PlantedKind::NearDip});
                u = dip.end + it.before->offset;
            }
            const FrameInterval fall{u, u + it.length - 1};
            placed.falls.push_back(fall);
            if (it.after) {
                const Frame a0 = fall.end + L - 1 + it.after->offset;
                placed.dips.push_back({{a0, a0 + it.after->length - 1}, PlantedKind::NearDip});
            }
        }
        cursor += it.width(L) - 1 + gap;
    }
    std::sort(placed.falls.begin(), placed.falls.end(),
              [](const FrameInterval& a, const FrameInterval& b) { return a.start < b.start; });
    ann.fall_intervals = placed.falls;

    for (const auto& fall : placed.falls)
        out.ledger.push_back({ann.video_id, PlantedKind::Fall, fall, fall.length(), std::nullopt});
    std::sort(placed.dips.begin(), placed.dips.end(),
              [](const auto& a, const auto& b) { return a.first.start < b.first.start; });
    for (const auto& [dip, kind] : placed.dips) {
        const FrameInterval covered{dip.start - (L - 1), dip.end};
        std::optional<Frame> offset;
        for (const auto& fall : placed.falls) {
            const Frame d = fall.start > covered.end ? fall.start - covered.end : covered.start - fall.end;
            offset = offset ? std::min(*offset, d) : d;
        }
        out.ledger.push_back({ann.video_id, kind, dip, dip.length(), offset});
    }

    // Frame-level fall mask as a prefix sum, and anchor-level dip mask.
    std::vector<Frame> fall_prefix(static_cast<std::size_t>(F) + 1, 0);
    {
        std::vector<char> mask(static_cast<std::size_t>(F), 0);
        for (const auto& fall : placed.falls)
            std::fill(mask.begin() + fall.start, mask.begin() + fall.end + 1, 1);
        for (Frame f = 0; f < F; ++f)
            fall_prefix[static_cast<std::size_t>(f) + 1] = fall_prefix[static_cast<std::size_t>(f)] + mask[static_cast<std::size_t>(f)];
    }
    std::vector<char> in_dip(static_cast<std::size_t>(F), 0);
    for (const auto& [dip, kind] : placed.dips)
        std::fill(in_dip.begin() + dip.start, in_dip.begin() + dip.end + 1, 1);

    PredictionStream stream;
    stream.video_id = ann.video_id;
    for (Frame a = L - 1; a < F; ++a) {
        double score;
        if (in_dip[static_cast<std::size_t>(a)]) {
            score = spec.dip_level;
        }
        else {
            const auto inside = fall_prefix[static_cast<std::size_t>(a) + 1] - fall_prefix[static_cast<std::size_t>(a - L + 1)];
            const double fraction = static_cast<double>(inside) / static_cast<double>(L);
            score = spec.background_level - fraction * (spec.background_level - spec.fall_level);
        }
        if (spec.score_noise > 0.0)
            score += rng.uniform(-spec.score_noise, spec.score_noise);
        score = std::round(std::clamp(score, 0.0, 1.0) * 1e6) / 1e6;
        stream.scores.push_back({a, score});
    }

    out.annotations.push_back(std::move(ann));
    out.streams.push_back(std::move(stream));
}

} // namespace

void validate(const SynthSpec& s)
{
    auto fail = [](const std::string& what) { throw InputError("synthetic spec: " + what); };
    if (s.database_id.empty())
        fail("empty database_id");
    if (s.video_count < 0)
        fail("video_count must be >= 0");
    if (!(s.fps > 0.0))
        fail("fps must be positive");
    if (s.frames_per_video < 1)
        fail("frames_per_video must be >= 1");
    if (!(s.fall_rate >= 0.0) || !(s.far_fp_rate >= 0.0))
        fail("rates must be >= 0");
    if (!(s.near_fall_fp_rate >= 0.0 && s.near_fall_fp_rate <= 2.0))
        fail("near_fall_fp_rate must lie in [0, 2]");
    if (s.fall_duration.mean < 1 || s.fp_duration.mean < 1 || s.fall_duration.spread < 0 || s.fp_duration.spread < 0)
        fail("durations need mean >= 1 and spread >= 0");
    if (!(s.score_noise >= 0.0))
        fail("score_noise must be >= 0");
    if (s.near_offset_max < 1)
        fail("near_offset_max must be >= 1");
    if (s.far_offset_min <= s.near_offset_max)
        fail("far_offset_min must exceed near_offset_max");
    for (double level : {s.fall_level, s.background_level, s.dip_level}) {
        if (!(level >= 0.0 && level <= 1.0))
            fail("score levels must lie in [0, 1]");
    }
    if (s.stack_length < 1)
        fail("stack_length must be >= 1");
    if (s.group_size < 1)
        fail("group_size must be >= 1");
}

const char* to_string(PlantedKind kind)
{
    switch (kind) {
    case PlantedKind::Fall:
        return "fall";
    case PlantedKind::NearDip:
        return "near_dip";
    case PlantedKind::FarDip:
        return "far_dip";
    }
    return "?";
}

std::size_t SynthCorpus::planted_falls() const
{
    return static_cast<std::size_t>(std::count_if(ledger.begin(), ledger.end(),
                                                   [](const PlantedEvent& e) { return e.kind == PlantedKind::Fall; }));
}

SynthCorpus generate(const SynthSpec& spec)
{
    return generate(std::span<const SynthSpec>(&spec, 1));
}

SynthCorpus generate(std::span<const SynthSpec> specs)
{
    SynthCorpus out;
    for (const auto& spec : specs) {
        validate(spec);
        for (int i = 0; i < spec.video_count; ++i)
            generate_video(spec, i, out);
    }
    return out;
}

std::vector<SynthSpec> default_synthetic_corpus(std::uint64_t seed)
{
    SynthSpec urfd;
    urfd.database_id = "URFD";
    urfd.video_count = 30;
    urfd.fps = 30.0;
    urfd.frames_per_video = 450;
    urfd.fall_duration = {30, 6};
    urfd.fp_duration = {5, 4};
    urfd.score_noise = 0.03;
    urfd.near_fall_fp_rate = 0.4;
    urfd.far_fp_rate = 0.4;
    urfd.seed = seed;

    SynthSpec fdd = urfd;
    fdd.database_id = "FDD";
    fdd.video_count = 99;
    fdd.fps = 25.0;
    fdd.frames_per_video = 375;
    fdd.fall_duration = {24, 4};
    fdd.fp_duration = {4, 3};
    fdd.seed = seed + 1;

    SynthSpec multicam = urfd;
    multicam.database_id = "Multicam";
    multicam.video_count = 25;
    multicam.fall_rate = 8.0;
    multicam.frames_per_video = 3000;
    multicam.fall_duration = {41, 8};
    multicam.far_fp_rate = 3.0;
    multicam.seed = seed + 2;

    return {urfd, fdd, multicam};
}

nlohmann::ordered_json to_json(const SynthSpec& s)
{
    nlohmann::ordered_json j;
    j["database_id"] = s.database_id;
    j["video_count"] = s.video_count;
    j["fps"] = s.fps;
    j["frames_per_video"] = s.frames_per_video;
    j["fall_rate"] = s.fall_rate;
    j["fall_duration"] = {{"mean", s.fall_duration.mean}, {"spread", s.fall_duration.spread}};
    j["score_noise"] = s.score_noise;
    j["near_fall_fp_rate"] = s.near_fall_fp_rate;
    j["far_fp_rate"] = s.far_fp_rate;
    j["fp_duration"] = {{"mean", s.fp_duration.mean}, {"spread", s.fp_duration.spread}};
    j["near_offset_max"] = s.near_offset_max;
    j["far_offset_min"] = s.far_offset_min;
    j["fall_level"] = s.fall_level;
    j["background_level"] = s.background_level;
    j["dip_level"] = s.dip_level;
    j["stack_length"] = s.stack_length;
    j["group_size"] = s.group_size;
    j["seed"] = s.seed;
    return j;
}

SynthSpec synth_spec_from_json(const nlohmann::json& j)
{
    SynthSpec s;
    if (!j.is_object())
        throw InputError("synthetic spec must be a JSON object");
    auto dist = [&](const char* key, DurationDist& d) {
        if (auto it = j.find(key); it != j.end()) {
            d.mean = it->value("mean", d.mean);
            d.spread = it->value("spread", d.spread);
        }
    };
    try {
        s.database_id = j.value("database_id", s.database_id);
        s.video_count = j.value("video_count", s.video_count);
        s.fps = j.value("fps", s.fps);
        s.frames_per_video = j.value("frames_per_video", s.frames_per_video);
        s.fall_rate = j.value("fall_rate", s.fall_rate);
        dist("fall_duration", s.fall_duration);
        s.score_noise = j.value("score_noise", s.score_noise);
        s.near_fall_fp_rate = j.value("near_fall_fp_rate", s.near_fall_fp_rate);
        s.far_fp_rate = j.value("far_fp_rate", s.far_fp_rate);
        dist("fp_duration", s.fp_duration);
        s.near_offset_max = j.value("near_offset_max", s.near_offset_max);
        s.far_offset_min = j.value("far_offset_min", s.far_offset_min);
        s.fall_level = j.value("fall_level", s.fall_level);
        s.background_level = j.value("background_level", s.background_level);
        s.dip_level = j.value("dip_level", s.dip_level);
        s.stack_length = j.value("stack_length", s.stack_length);
        s.group_size = j.value("group_size", s.group_size);
        s.seed = j.value("seed", s.seed);
    }
    catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("synthetic spec: ") + e.what());
    }
    validate(s);
    return s;
}

nlohmann::ordered_json ledger_json(std::span<const SynthSpec> specs, const SynthCorpus& corpus)
{
    nlohmann::ordered_json j;
    j["rng"] = PortableRng::algorithm;
    auto sj = nlohmann::ordered_json::array();
    for (const auto& s : specs)
        sj.push_back(to_json(s));
    j["specs"] = std::move(sj);
    j["planted_falls"] = corpus.planted_falls();
    auto events = nlohmann::ordered_json::array();
    for (const auto& e : corpus.ledger) {
        nlohmann::ordered_json ej;
        ej["video_id"] = e.video_id;
        ej["kind"] = to_string(e.kind);
        ej["start"] = e.frames.start;
        ej["end"] = e.frames.end;
        ej["duration_frames"] = e.duration_frames;
        if (e.kind != PlantedKind::Fall)
            ej["offset_frames"] = e.offset_frames ? nlohmann::ordered_json(*e.offset_frames) : nlohmann::ordered_json();
        events.push_back(std::move(ej));
    }
    j["events"] = std::move(events);
    return j;
}

} // namespace alarm_pipeline
