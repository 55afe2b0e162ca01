#include "alarm_pipeline/corpus_io.hpp"
#include "alarm_pipeline/error.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace alarm_pipeline;

namespace {

std::string expect_parse_error(const std::string& text, bool predictions)
{
    std::istringstream in(text);
    try {
        if (predictions)
            read_predictions(in);
        else
            read_annotations(in);
    }
    catch (const ParseError& e) {
        return e.what();
    }
    ADD_FAILURE() << "no ParseError for: " << text;
    return {};
}

} // namespace

TEST(AnnotationIo, UrfdStyleRecordRoundTripsByteIdentically)
{
    const std::string text =
        R"({"video_id":"fall-01","database_id":"URFD","fps":30,"frame_count":160,"fall_intervals":[[95,124]],"group_id":"fall-01"})"
        "\n"
        R"({"video_id":"adl-01","database_id":"URFD","fps":30,"frame_count":200,"fall_intervals":[],"group_id":"adl-01"})"
        "\n";
    std::istringstream in(text);
    const auto anns = read_annotations(in);
    ASSERT_EQ(anns.size(), 2u);
    EXPECT_EQ(anns[0].fall_intervals[0].length(), 30);
    EXPECT_TRUE(anns[1].fall_intervals.empty());

    std::ostringstream out;
    write_annotations(out, anns);
    EXPECT_EQ(out.str(), text);
}

TEST(AnnotationIo, FractionalFpsAndMissingGroup)
{
    std::istringstream in(R"({"video_id":"a","database_id":"d","fps":29.97,"frame_count":10,"fall_intervals":[[2,3]]})");
    const auto anns = read_annotations(in);
    EXPECT_DOUBLE_EQ(anns[0].fps, 29.97);
    EXPECT_EQ(anns[0].group_id, "a");
    std::ostringstream out;
    write_annotations(out, anns);
    EXPECT_NE(out.str().find("\"fps\":29.97"), std::string::npos);
}

TEST(AnnotationIo, RejectsInvariantViolationsWithLineNumber)
{
    const std::string good =
        R"({"video_id":"a","database_id":"d","fps":30,"frame_count":100,"fall_intervals":[]})"
        "\n";
    auto msg = expect_parse_error(
        good + "\n" + R"({"video_id":"b","database_id":"d","fps":30,"frame_count":100,"fall_intervals":[[30,20]]})",
        false);
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;

    msg = expect_parse_error(
        R"({"video_id":"b","database_id":"d","fps":30,"frame_count":100,"fall_intervals":[[10,20],[15,30]]})", false);
    EXPECT_NE(msg.find("overlap"), std::string::npos) << msg;

    expect_parse_error(R"({"video_id":"b","database_id":"d","fps":30,"frame_count":100})", false);
    expect_parse_error(R"({"video_id":"b","database_id":"d","fps":-1,"frame_count":100,"fall_intervals":[]})", false);
    expect_parse_error(R"({"video_id":"b",)", false);
    expect_parse_error(R"({"video_id":"b","database_id":"d","fps":30,"frame_count":100,"fall_intervals":[[1]]})", false);
}

TEST(PredictionIo, ParsesInterleavedVideos)
{
    std::istringstream in("video_id,anchor_frame,score\r\na,9,0.5\r\nb,9,1\r\na,10,0.25\r\n");
    const auto streams = read_predictions(in);
    ASSERT_EQ(streams.size(), 2u);
    EXPECT_EQ(streams[0].video_id, "a");
    ASSERT_EQ(streams[0].scores.size(), 2u);
    EXPECT_EQ(streams[0].scores[1], (StackScore{10, 0.25}));
    EXPECT_EQ(streams[1].scores[0].score, 1.0);
}

TEST(PredictionIo, RejectsBadRecords)
{
    auto msg = expect_parse_error("video_id,anchor_frame,score\na,10,0.5\na,10,0.4\n", true);
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("not increasing"), std::string::npos) << msg;

    msg = expect_parse_error("video_id,anchor_frame,score\na,10,1.5\n", true);
    EXPECT_NE(msg.find("outside [0, 1]"), std::string::npos) << msg;

    expect_parse_error("video,anchor,score\n", true);
    expect_parse_error("video_id,anchor_frame,score\na,x,0.5\n", true);
    expect_parse_error("video_id,anchor_frame,score\na,1,0.5,7\n", true);
    expect_parse_error("video_id,anchor_frame,score\n,1,0.5\n", true);
}

TEST(CorpusIo, RandomCorporaSurviveWriteRead)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<VideoAnnotation> anns;
        std::vector<PredictionStream> streams;
        const int n = 1 + static_cast<int>(rng() % 5);
        for (int v = 0; v < n; ++v) {
            VideoAnnotation a;
            a.video_id = "vid" + std::to_string(v);
            a.database_id = trial % 2 ? "FDD" : "URFD";
            a.group_id = "g" + std::to_string(v / 2);
            a.fps = trial % 3 ? 25.0 : 12.5 + unit(rng);
            a.frame_count = 100;
            Frame cursor = 0;
            while (cursor < 90 && rng() % 3) {
                const Frame end = cursor + static_cast<Frame>(rng() % 8);
                a.fall_intervals.push_back({cursor, end});
                cursor = end + 1 + static_cast<Frame>(rng() % 10);
            }
            anns.push_back(a);

            PredictionStream s{a.video_id, {}};
            for (Frame f = 9; f < 100; f += 1 + static_cast<Frame>(rng() % 3))
                s.scores.push_back({f, unit(rng)});
            streams.push_back(s);
        }

        std::stringstream a_text, p_text;
        write_annotations(a_text, anns);
        write_predictions(p_text, streams);
        EXPECT_EQ(read_annotations(a_text), anns);
        EXPECT_EQ(read_predictions(p_text), streams);
    }
}

TEST(CorpusIo, FormatRealIsShortestRoundTrip)
{
    EXPECT_EQ(format_real(0.5), "0.5");
    EXPECT_EQ(format_real(1.0), "1");
    EXPECT_EQ(format_real(0.1), "0.1");
}
