#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "common/event_log.hpp"
#include "common/text.hpp"

using namespace straptor;

TEST(Text, TrimAndCollapse) {
  EXPECT_EQ(text::trim("  a b \t\n"), "a b");
  EXPECT_EQ(text::collapse_whitespace("  a \t b\n\nc "), "a b c");
  EXPECT_TRUE(text::iequals("Price", "pRICE"));
  EXPECT_TRUE(text::icontains("Completion Rate (%)", "completion rate"));
  EXPECT_FALSE(text::icontains("Rate", "completion"));
}

TEST(Text, Utf8Validation) {
  EXPECT_TRUE(text::is_valid_utf8("caf\xC3\xA9"));
  EXPECT_FALSE(text::is_valid_utf8("\xC3\x28"));
  EXPECT_FALSE(text::is_valid_utf8("\xFF"));
  EXPECT_EQ(text::strip_bom("\xEF\xBB\xBFx"), "x");
}

TEST(Text, SlugAndSplit) {
  EXPECT_EQ(text::slug("What is the Price of A?"), "what-is-the-price-of-a");
  const auto parts = text::split("a,,b", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[1], "");
  EXPECT_EQ(text::join(parts, "|"), "a||b");
}

TEST(Text, NumberRendering) {
  EXPECT_EQ(text::shortest_decimal(0.1), "0.1");
  EXPECT_EQ(text::shortest_decimal(3.0), "3");
  EXPECT_EQ(text::display_number(0.7), "0.7");
  EXPECT_EQ(text::display_number(0.1 + 0.2), "0.3");
  EXPECT_EQ(text::display_number(-12.5), "-12.5");
  EXPECT_EQ(text::display_number(1e6), "1000000");
}

TEST(Text, Fnv1aKnownValues) {
  EXPECT_EQ(text::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(text::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(text::hex64(0xabcull), "0000000000000abc");
}

TEST(Text, FileNames) {
  EXPECT_EQ(text::file_stem("/tmp/dir/sales.xlsx"), "sales");
  EXPECT_EQ(text::file_extension_lower("Report.HTML"), ".html");
}

TEST(Error, CodesHaveNames) {
  EXPECT_EQ(to_string(ErrorCode::VersionConflict), "VersionConflict");
  EXPECT_TRUE(is_model_error(ErrorCode::Timeout));
  EXPECT_FALSE(is_model_error(ErrorCode::NodeNotFound));
  try {
    fail(ErrorCode::NodeNotFound, "missing n9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NodeNotFound);
    EXPECT_NE(std::string(e.what()).find("n9"), std::string::npos);
  }
}

TEST(EventLog, SequenceContinuesAcrossReopen) {
  const auto path = std::filesystem::temp_directory_path() / "straptor_event_log_test.jsonl";
  std::filesystem::remove(path);
  {
    EventLog log(path);
    log.emit("build", "start", {{"file", "a.csv"}});
    log.emit("build", "done");
    EXPECT_EQ(log.last_seq(), 2u);
    const auto tail = log.since(1);
    ASSERT_EQ(tail.size(), 1u);
    EXPECT_EQ(tail[0]["event"], "done");
  }
  EventLog reopened(path);
  reopened.emit("qa", "answer");
  EXPECT_EQ(reopened.last_seq(), 3u);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["seq"].get<int>(), ++lines);
    EXPECT_TRUE(j.contains("ts_ms"));
  }
  EXPECT_EQ(lines, 3);
  std::filesystem::remove(path);
}
