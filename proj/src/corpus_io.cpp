#include "alarm_pipeline/corpus_io.hpp"

#include "alarm_pipeline/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace alarm_pipeline {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(std::size_t line, const std::string& what)
{
    throw ParseError("line " + std::to_string(line) + ": " + what);
}

std::string strip_cr(std::string s)
{
    if (!s.empty() && s.back() == '\r')
        s.pop_back();
    return s;
}

bool blank(const std::string& s)
{
    return s.find_first_not_of(" \t\r") == std::string::npos;
}

VideoAnnotation annotation_from_json(const json& j, std::size_t line)
{
    if (!j.is_object())
        parse_fail(line, "expected a JSON object");
    auto require = [&](const char* key) -> const json& {
        auto it = j.find(key);
        if (it == j.end())
            parse_fail(line, std::string("missing \"") + key + "\"");
        return *it;
    };

    VideoAnnotation a;
    const auto& id = require("video_id");
    const auto& db = require("database_id");
    const auto& fps = require("fps");
    const auto& frames = require("frame_count");
    const auto& falls = require("fall_intervals");
    if (!id.is_string() || !db.is_string())
        parse_fail(line, "video_id and database_id must be strings");
    if (!fps.is_number())
        parse_fail(line, "fps must be a number");
    if (!frames.is_number_integer())
        parse_fail(line, "frame_count must be an integer");
    if (!falls.is_array())
        parse_fail(line, "fall_intervals must be an array");

    a.video_id = id.get<std::string>();
    a.database_id = db.get<std::string>();
    a.fps = fps.get<double>();
    a.frame_count = frames.get<Frame>();
    for (const auto& iv : falls) {
        if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number_integer() || !iv[1].is_number_integer())
            parse_fail(line, "each fall interval must be [start, end] integers");
        a.fall_intervals.push_back({iv[0].get<Frame>(), iv[1].get<Frame>()});
    }
    if (auto it = j.find("group_id"); it != j.end()) {
        if (!it->is_string())
            parse_fail(line, "group_id must be a string");
        a.group_id = it->get<std::string>();
    }
    else {
        a.group_id = a.video_id;
    }

    try {
        validate(a);
    }
    catch (const InputError& e) {
        parse_fail(line, e.what());
    }
    return a;
}

template <typename T>
bool parse_number(const std::string& field, T& value)
{
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open " + path.string());
    return in;
}

} // namespace

std::string format_real(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::vector<VideoAnnotation> read_annotations(std::istream& in)
{
    std::vector<VideoAnnotation> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (blank(text))
            continue;
        json j;
        try {
            j = json::parse(text);
        }
        catch (const json::parse_error& e) {
            parse_fail(line, std::string("malformed JSON: ") + e.what());
        }
        out.push_back(annotation_from_json(j, line));
    }
    return out;
}

std::vector<VideoAnnotation> load_annotations(const std::filesystem::path& path)
{
    auto in = open_in(path);
    try {
        return read_annotations(in);
    }
    catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_annotations(std::ostream& out, const std::vector<VideoAnnotation>& annotations)
{
    for (const auto& a : annotations) {
        nlohmann::ordered_json j;
        j["video_id"] = a.video_id;
        j["database_id"] = a.database_id;
        if (std::trunc(a.fps) == a.fps && std::abs(a.fps) < 1e15)
            j["fps"] = static_cast<std::int64_t>(a.fps);
        else
            j["fps"] = a.fps;
        j["frame_count"] = a.frame_count;
        auto falls = nlohmann::ordered_json::array();
        for (const auto& iv : a.fall_intervals)
            falls.push_back({iv.start, iv.end});
        j["fall_intervals"] = std::move(falls);
        j["group_id"] = a.group_id.empty() ? a.video_id : a.group_id;
        out << j.dump() << '\n';
    }
}

void save_annotations(const std::filesystem::path& path, const std::vector<VideoAnnotation>& annotations)
{
    auto out = open_out(path);
    write_annotations(out, annotations);
}

std::vector<PredictionStream> read_predictions(std::istream& in)
{
    std::string text;
    if (!std::getline(in, text) || strip_cr(text) != "video_id,anchor_frame,score")
        parse_fail(1, "expected header 'video_id,anchor_frame,score'");

    std::vector<PredictionStream> out;
    std::map<std::string, std::size_t> index;
    std::size_t line = 1;
    while (std::getline(in, text)) {
        ++line;
        text = strip_cr(text);
        if (blank(text))
            continue;

        const auto c1 = text.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : text.find(',', c1 + 1);
        if (c2 == std::string::npos || text.find(',', c2 + 1) != std::string::npos)
            parse_fail(line, "expected 3 comma-separated fields");
        const std::string video = text.substr(0, c1);
        const std::string anchor_text = text.substr(c1 + 1, c2 - c1 - 1);
        const std::string score_text = text.substr(c2 + 1);

        if (video.empty())
            parse_fail(line, "empty video_id");
        Frame anchor = 0;
        if (!parse_number(anchor_text, anchor))
            parse_fail(line, "bad anchor_frame '" + anchor_text + "'");
        double score = 0.0;
        if (!parse_number(score_text, score))
            parse_fail(line, "bad score '" + score_text + "'");
        if (!(score >= 0.0 && score <= 1.0))
            parse_fail(line, "score " + score_text + " outside [0, 1] for video '" + video + "'");
        if (anchor < 0)
            parse_fail(line, "negative anchor_frame for video '" + video + "'");

        auto [it, inserted] = index.emplace(video, out.size());
        if (inserted)
            out.push_back({video, {}});
        auto& stream = out[it->second];
        if (!stream.scores.empty() && stream.scores.back().anchor >= anchor)
            parse_fail(line, "anchor_frame " + anchor_text + " not increasing for video '" + video + "'");
        stream.scores.push_back({anchor, score});
    }
    return out;
}

std::vector<PredictionStream> load_predictions(const std::filesystem::path& path)
{
    auto in = open_in(path);
    try {
        return read_predictions(in);
    }
    catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_predictions(std::ostream& out, const std::vector<PredictionStream>& streams)
{
    out << "video_id,anchor_frame,score\n";
    for (const auto& s : streams) {
        for (const auto& sc : s.scores)
            out << s.video_id << ',' << sc.anchor << ',' << format_real(sc.score) << '\n';
    }
}

void save_predictions(const std::filesystem::path& path, const std::vector<PredictionStream>& streams)
{
    auto out = open_out(path);
    write_predictions(out, streams);
}

} // namespace alarm_pipeline
