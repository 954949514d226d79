#include <map>
#include <set>

#include <gtest/gtest.h>

#include "dxr/fvr.hpp"
#include "dxr/segment.hpp"

namespace {

using namespace dxr;

LabeledTrace make_trace(std::size_t packets, int label = 1) {
    LabeledTrace trace;
    trace.service_label = label;
    trace.packets.reserve(packets);
    for (std::size_t i = 0; i < packets; ++i) {
        PacketRecord rec;
        rec.timestamp = 0.001 * static_cast<double>(i);
        rec.length = 100.0 + static_cast<double>(i % 7);
        rec.iat = i == 0 ? 0.0 : 0.001;
        trace.packets.push_back(rec);
    }
    return trace;
}

TEST(Segmenter, FloorArithmeticDiscardsRemainder) {
    const auto segments = segment(make_trace(10), 3);
    ASSERT_EQ(segments.size(), 3u);
    EXPECT_DOUBLE_EQ(segments[0].packets.front().timestamp, 0.0);
    EXPECT_DOUBLE_EQ(segments[1].packets.front().timestamp, 0.003);
    EXPECT_DOUBLE_EQ(segments[2].packets.back().timestamp, 0.008);  // packet 9 discarded
    for (std::size_t k = 0; k < segments.size(); ++k) {
        EXPECT_EQ(segments[k].index, k);
        EXPECT_EQ(segments[k].packets.size(), 3u);
    }
}

TEST(Segmenter, ExactFitYieldsOneSegment) {
    const auto segments = segment(make_trace(6000), 6000);
    ASSERT_EQ(segments.size(), 1u);
    EXPECT_EQ(segments[0].packets.size(), 6000u);
}

TEST(Segmenter, SizeZeroRejected) {
    EXPECT_THROW(segment(make_trace(10), 0), SizeZeroError);
}

// concatenation oracle over a million packets
TEST(Segmenter, ConcatenationReproducesPrefix) {
    const auto trace = make_trace(1000000);
    const auto segments = segment(trace, 500);
    ASSERT_EQ(segments.size(), 2000u);
    std::size_t pos = 0;
    for (const auto& seg : segments) {
        for (const auto& p : seg.packets) {
            ASSERT_EQ(p, trace.packets[pos]) << "at packet " << pos;
            ++pos;
        }
    }
    EXPECT_EQ(pos, 1000000u);
}

TEST(Segmenter, LabelPreserved) {
    const auto segments = segment(make_trace(100, 4), 10);
    for (const auto& seg : segments) EXPECT_EQ(seg.label, 4);
}

std::vector<FrameVector> make_vectors(std::size_t n, std::size_t classes) {
    std::vector<FrameVector> vectors(n);
    for (std::size_t i = 0; i < n; ++i) {
        vectors[i].label = static_cast<int>(i % classes) + 1;
        vectors[i].segment_index = i;
        vectors[i].features[0] = static_cast<double>(i);
    }
    return vectors;
}

TEST(Split, RoundedValidationCount) {
    const auto [train, val] = split_train_val(make_vectors(10, 2), 0.2, 7,
                                              [](const FrameVector& v) { return v.label; });
    EXPECT_EQ(val.size(), 2u);
    EXPECT_EQ(train.size(), 8u);
}

TEST(Split, DegenerateSplitRejected) {
    EXPECT_THROW(split_train_val(make_vectors(2, 2), 0.1, 7,
                                 [](const FrameVector& v) { return v.label; }),
                 DegenerateSplitError);
}

// per-class count oracle: 100 vectors, 5 equal classes, ratio 0.2
TEST(Split, StratifiedPerClassCounts) {
    const auto [train, val] = split_train_val(make_vectors(100, 5), 0.2, 11,
                                              [](const FrameVector& v) { return v.label; });
    EXPECT_EQ(val.size(), 20u);
    std::map<int, int> per_class;
    for (const auto& v : val) ++per_class[v.label];
    for (int c = 1; c <= 5; ++c) EXPECT_EQ(per_class[c], 4) << "class " << c;
}

TEST(Split, DisjointUnionAndDeterminism) {
    const auto vectors = make_vectors(57, 3);
    const auto [train1, val1] = split_train_val(vectors, 0.3, 99,
                                                [](const FrameVector& v) { return v.label; });
    const auto [train2, val2] = split_train_val(vectors, 0.3, 99,
                                                [](const FrameVector& v) { return v.label; });

    std::set<std::size_t> seen;
    for (const auto& v : train1) seen.insert(v.segment_index);
    for (const auto& v : val1) {
        EXPECT_FALSE(seen.count(v.segment_index)) << "overlap at " << v.segment_index;
        seen.insert(v.segment_index);
    }
    EXPECT_EQ(seen.size(), vectors.size());

    ASSERT_EQ(val1.size(), val2.size());
    for (std::size_t i = 0; i < val1.size(); ++i)
        EXPECT_EQ(val1[i].segment_index, val2[i].segment_index);
    ASSERT_EQ(train1.size(), train2.size());
    for (std::size_t i = 0; i < train1.size(); ++i)
        EXPECT_EQ(train1[i].segment_index, train2[i].segment_index);
}

TEST(Split, DifferentSeedsShuffleDifferently) {
    const auto vectors = make_vectors(60, 3);
    const auto [train1, val1] = split_train_val(vectors, 0.25, 1,
                                                [](const FrameVector& v) { return v.label; });
    const auto [train2, val2] = split_train_val(vectors, 0.25, 2,
                                                [](const FrameVector& v) { return v.label; });
    std::set<std::size_t> a, b;
    for (const auto& v : val1) a.insert(v.segment_index);
    for (const auto& v : val2) b.insert(v.segment_index);
    EXPECT_NE(a, b);
}

TEST(Split, SingletonClassFallsBackToPlainSplit) {
    auto vectors = make_vectors(21, 2);
    vectors[20].label = 9;  // one lone vector of class 9
    const auto [train, val] = split_train_val(vectors, 0.25, 5,
                                              [](const FrameVector& v) { return v.label; });
    EXPECT_EQ(val.size(), 5u);
    EXPECT_EQ(train.size() + val.size(), 21u);
}

}  // namespace
