#include <gtest/gtest.h>

#include "stabcert/cli/toml.hpp"
#include "stabcert/errors.hpp"

using namespace stabcert;
using namespace stabcert::cli;

namespace {

std::string error_of(std::string_view text) {
    try {
        (void)parse_toml(text);
    } catch (const ParameterError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Toml, ScalarsAndTables) {
    const auto doc = parse_toml(R"(# leading comment
[run]
command = "simulate"   # trailing comment
seed = 42
rel_tol = 1e-8
flag = true
neg = -3
under_score = 1_000

[gamma]
b0 = 1.5
label = "a # not a comment"
)");
    const TomlTable* run = doc.find("run");
    ASSERT_NE(run, nullptr);
    EXPECT_EQ(run->at("command").as_string(), "simulate");
    EXPECT_EQ(run->at("seed").as_integer(), 42);
    EXPECT_TRUE(run->at("seed").is_number());
    EXPECT_DOUBLE_EQ(run->at("rel_tol").as_double(), 1e-8);
    EXPECT_TRUE(run->at("flag").as_bool());
    EXPECT_EQ(run->at("neg").as_integer(), -3);
    EXPECT_EQ(run->at("under_score").as_integer(), 1000);
    EXPECT_EQ(run->at("command").line(), 3u);
    EXPECT_EQ(doc.find("gamma")->at("label").as_string(), "a # not a comment");
    EXPECT_DOUBLE_EQ(doc.find("run")->at("seed").as_double(), 42.0);
    EXPECT_EQ(doc.find("missing"), nullptr);
}

TEST(Toml, NestedMultilineArrays) {
    const auto doc = parse_toml(R"([levinson]
A = [
  [0.0, 1.0],   # first row
  [-1.0, 0.0],
]
names = ["x", "y"]
empty = []
)");
    const auto& a = doc.find("levinson")->at("A").as_array();
    ASSERT_EQ(a.size(), 2u);
    EXPECT_DOUBLE_EQ(a[1].as_array()[0].as_double(), -1.0);
    EXPECT_EQ(doc.find("levinson")->at("names").as_array()[1].as_string(), "y");
    EXPECT_TRUE(doc.find("levinson")->at("empty").as_array().empty());
}

TEST(Toml, StringEscapes) {
    const auto doc = parse_toml("[a]\ns = \"tab\\tquote\\\"end\"\nl = 'lit\\n'\n");
    EXPECT_EQ(doc.find("a")->at("s").as_string(), "tab\tquote\"end");
    EXPECT_EQ(doc.find("a")->at("l").as_string(), "lit\\n");
}

TEST(Toml, ErrorsNameTheLine) {
    EXPECT_NE(error_of("[a]\nx = 1\nx = 2\n").find("line 3"), std::string::npos);
    EXPECT_NE(error_of("[a]\nx = \n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("[a]\nx = \"open\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("[a\nx = 1\n").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("[a]\n[a]\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("[a]\nx = [1, 2\n").find("line"), std::string::npos);
    EXPECT_NE(error_of("[a]\nx = 1 2\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("[a]\nx = {y = 1}\n").find("line 2"), std::string::npos);
}

TEST(Toml, TypeMismatchNamesTheLine) {
    const auto doc = parse_toml("[a]\n\nx = \"text\"\n");
    try {
        (void)doc.find("a")->at("x").as_double();
        FAIL() << "expected ParameterError";
    } catch (const ParameterError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}
