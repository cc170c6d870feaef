#include <gtest/gtest.h>

#include <fstream>
#include <string>
#include <vector>

#include "spider/segmentation.hpp"

using namespace spider;

namespace {

std::vector<std::string> golden_lines(const std::string& name) {
  std::ifstream in(std::string(SPIDER_TEST_DATA) + "/wire/" + name);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ErrorCode code_of_response(const std::string& line) {
  try {
    decode_response(line);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::EmptyInput;
}

}  // namespace

TEST(RoundPoint, HalfAwayFromZeroThenClamp) {
  EXPECT_EQ(round_point({2.5, 3.49}, {10, 10}), std::make_pair(3, 3));
  EXPECT_EQ(round_point({-0.5, 9.5}, {10, 10}), std::make_pair(0, 9));
  EXPECT_EQ(round_point({100, -7}, {10, 10}), std::make_pair(9, 0));
}

TEST(Wire, GoldenRequestsAreBitExact) {
  const auto golden = golden_lines("requests.golden.jsonl");
  ASSERT_EQ(golden.size(), 2u);
  EXPECT_EQ(encode_request(make_request("s000003/1", "images/s000003.png", {63.5, 190.5}, {256, 256})), golden[0]);
  EXPECT_EQ(encode_request(make_request("s000004/0", "/data/run/images/s000004.png", {-3.2, 60.0}, {64, 48})),
            golden[1]);
  for (const auto& line : golden) EXPECT_EQ(encode_request(decode_request(line)), line);
}

TEST(Wire, GoldenResponsesAreBitExact) {
  const auto golden = golden_lines("responses.golden.jsonl");
  ASSERT_EQ(golden.size(), 2u);
  for (const auto& line : golden) EXPECT_EQ(encode_response(decode_response(line)), line);
  RegionMask m({4, 3});
  m.set(0, 0);
  m.set(1, 0);
  m.set(0, 1);
  m.set(1, 1);
  EXPECT_EQ(encode_response({"s000003/1", rle_encode(m), {4, 3}}), golden[0]);
}

TEST(Wire, MalformedResponsesAreProtocolViolations) {
  for (const std::string& bad : {
           std::string("not json"),
           std::string("[1,2]"),
           std::string(R"({"rle":[12],"width":4,"height":3})"),
           std::string(R"({"id":"a","rle":[11],"width":4,"height":3})"),
           std::string(R"({"id":"a","rle":[-1,13],"width":4,"height":3})"),
           std::string(R"({"id":"a","rle":[12.5],"width":4,"height":3})"),
           std::string(R"({"id":"a","rle":[12],"width":4})"),
           std::string(R"({"id":"a","rle":[0],"width":0,"height":0})"),
       }) {
    EXPECT_EQ(code_of_response(bad), ErrorCode::ProtocolViolation) << bad;
  }
  try {
    decode_response("garbage-payload");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("garbage-payload"), std::string::npos);
  }
}

TEST(Wire, ResponseMustAnswerItsRequest) {
  const auto req = make_request("a", "img.png", {1, 1}, {4, 3});
  const std::string other = R"({"id":"b","rle":[12],"width":4,"height":3})";
  try {
    mask_from_response(req, decode_response(other), other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProtocolViolation);
  }
  const std::string wrong_dims = R"({"id":"a","rle":[6],"width":3,"height":2})";
  try {
    mask_from_response(req, decode_response(wrong_dims), wrong_dims);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
}

TEST(OracleSegmenter, ContainingRegionElseNearestCenter) {
  RegionMask a({10, 10}), b({10, 10});
  a.set(1, 1);
  b.set(8, 8);
  EXPECT_EQ(segment_oracle({1.2, 0.9}, {a, b}), a);
  EXPECT_EQ(segment_oracle({6, 6}, {a, b}), b);
  EXPECT_THROW(segment_oracle({1, 1}, {}), Error);
}

TEST(FloodFill, GrowsWithinTolerance) {
  ImageBuffer img({6, 4}, Rgb{10, 10, 10});
  for (int y = 0; y < 4; ++y) img.set_pixel(3, y, {200, 0, 0});
  const auto m = segment_flood_fill({1, 1}, img, 5);
  EXPECT_EQ(m.count(), 12u);
  EXPECT_FALSE(m.test(3, 0));
  EXPECT_FALSE(m.test(5, 0));
  EXPECT_EQ(segment_flood_fill({1, 1}, img, 255).count(), 24u);
  EXPECT_THROW(segment_flood_fill({-1, 1}, img, 5), Error);
}

TEST(ExternalSegmenter, TalksToAStubPeer) {
  ExternalSegmenter seg(std::string(SPIDER_STUB_PEER) + " --half 1");
  const auto m = seg.segment("x/1", "img.png", {4.4, 2.6}, {10, 8});
  EXPECT_EQ(m.count(), 9u);
  EXPECT_TRUE(m.test(4, 3));
  EXPECT_EQ(seg.segment("x/2", "img.png", {0, 0}, {10, 8}).count(), 4u);
}

TEST(ExternalSegmenter, CorruptResponsesRaiseThenRecover) {
  ExternalSegmenter seg(std::string(SPIDER_STUB_PEER) + " --corrupt 1,2,3,4,5");
  for (int i = 0; i < 5; ++i) {
    try {
      seg.segment("x/" + std::to_string(i), "img.png", {3, 3}, {10, 8});
      ADD_FAILURE() << "response " << i << " accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ProtocolViolation) << e.what();
    }
  }
  EXPECT_EQ(seg.segment("x/ok", "img.png", {3, 3}, {10, 8}).count(), 25u);
}

TEST(ExternalSegmenter, DeadPeerIsUnreachable) {
  ExternalSegmenter seg(std::string(SPIDER_STUB_PEER) + " --exit-after 0");
  try {
    seg.segment("x", "img.png", {3, 3}, {10, 8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PeerUnreachable);
  }
}
