#include "accsteer/text.hpp"

#include <gtest/gtest.h>

using accsteer::normalize_transcript;
using accsteer::tokenize;

TEST(Normalize, LowercasesAndStripsPunctuation) {
    EXPECT_EQ(normalize_transcript("Please, call Stella!"), "please call stella");
    EXPECT_EQ(normalize_transcript("  a\t\tb \n c  "), "a b c");
    EXPECT_EQ(normalize_transcript("don't"), "don t");
    EXPECT_EQ(normalize_transcript("...!?"), "");
}

TEST(Normalize, KeepsDigitsAndUtf8) {
    EXPECT_EQ(normalize_transcript("Room 101"), "room 101");
    EXPECT_EQ(normalize_transcript("caf\xc3\xa9 Noir"), "caf\xc3\xa9 noir");
}

TEST(Normalize, Idempotent) {
    for (const char* s : {"Hello,  World", " x ", "A-B-C", ""})
        EXPECT_EQ(normalize_transcript(normalize_transcript(s)), normalize_transcript(s));
}

TEST(Tokenize, SplitsNormalizedWords) {
    EXPECT_EQ(tokenize("The cat, sat."), (std::vector<std::string>{"the", "cat", "sat"}));
    EXPECT_TRUE(tokenize("  ").empty());
}
