#include <gtest/gtest.h>

#include "tabplus/csv.hpp"

using namespace tabplus;

using Rows = std::vector<std::vector<std::string>>;

TEST(Csv, PlainRecords) {
  const auto t = parse_csv("a,b\n1,2\n3,4\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.rows, (Rows{{"1", "2"}, {"3", "4"}}));
}

TEST(Csv, QuotedFieldsHoldDelimitersNewlinesAndQuotes) {
  const auto t = parse_csv("a,b\n\"x,y\",\"line1\nline2\"\n\"say \"\"hi\"\"\",\"\"\n");
  EXPECT_EQ(t.rows, (Rows{{"x,y", "line1\nline2"}, {"say \"hi\"", ""}}));
}

TEST(Csv, CrlfAndMissingFinalNewline) {
  const auto t = parse_csv("a,b\r\n1,2\r\n3,4");
  EXPECT_EQ(t.rows, (Rows{{"1", "2"}, {"3", "4"}}));
}

TEST(Csv, BlankLinesAreSkipped) {
  const auto t = parse_csv("a\n\n1\n\r\n2\n\n");
  EXPECT_EQ(t.rows, (Rows{{"1"}, {"2"}}));
}

TEST(Csv, EmptyFieldsSurvive) {
  const auto t = parse_csv("a,b,c\n,,\n1,,3\n");
  EXPECT_EQ(t.rows, (Rows{{"", "", ""}, {"1", "", "3"}}));
}

TEST(Csv, OtherDelimiterAndNoHeader) {
  const auto t = parse_csv("1;2;x\n3;4;y\n", ';', false);
  EXPECT_EQ(t.header, (std::vector<std::string>{"c0", "c1", "c2"}));
  EXPECT_EQ(t.rows, (Rows{{"1", "2", "x"}, {"3", "4", "y"}}));
}

TEST(Csv, RaggedRecordReportsItsLine) {
  try {
    parse_csv("a,b\n1,2\n3\n");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Csv, UnterminatedQuoteIsAnError) {
  EXPECT_THROW(parse_csv("a\n\"open\n"), CsvError);
}

TEST(Csv, MissingFileIsAnError) {
  EXPECT_ANY_THROW(read_csv("/nonexistent/tabplus.csv"));
}
