#include "dialogkit/sentence_split.hpp"

#include "dialogkit/error.hpp"
#include "dialogkit/passage.hpp"

#include "doctest.h"

#include <cstdio>
#include <fstream>

using namespace dialogkit;

TEST_CASE("plain two-sentence split") {
    SentenceSplitter splitter;
    const auto got = splitter.split("A b. C d.");
    REQUIRE(got.size() == 2);
    CHECK(got[0] == "A b.");
    CHECK(got[1] == "C d.");
}

TEST_CASE("abbreviations do not end sentences") {
    SentenceSplitter splitter;
    // hand-segmented: the honorific keeps its period inside the sentence
    const auto got = splitter.split("Dr. Smith arrived. He left.");
    REQUIRE(got.size() == 2);
    CHECK(got[0] == "Dr. Smith arrived.");
    CHECK(got[1] == "He left.");

    // dotted acronyms never end a sentence, even before an uppercase word
    CHECK(splitter.split("He moved to the U.S. Then he left.").size() == 1);

    const auto initials =
        splitter.split("Edwin V. Sumner led the attack. It failed.");
    REQUIRE(initials.size() == 2);
    CHECK(initials[0] == "Edwin V. Sumner led the attack.");

    const auto honorific = splitter.split(
        "He reports to the Hon. John Ajaka MLC. The budget is large.");
    REQUIRE(honorific.size() == 2);
    CHECK(honorific[0] == "He reports to the Hon. John Ajaka MLC.");
}

TEST_CASE("unterminated and empty inputs") {
    SentenceSplitter splitter;
    const auto one = splitter.split("One sentence only");
    REQUIRE(one.size() == 1);
    CHECK(one[0] == "One sentence only");
    CHECK(splitter.split("").empty());
    CHECK(splitter.split("   \t\n ").empty());
}

TEST_CASE("boundaries require a sentence-opening character") {
    SentenceSplitter splitter;
    // lowercase continuation: no split
    CHECK(splitter.split("He said stop. and went on.").size() == 1);
    // quotes and digits do open sentences
    CHECK(splitter.split("It ended. \"Quote starts here.\"").size() == 2);
    CHECK(splitter.split("It was 1981. 1982 followed.").size() == 2);
    // terminal punctuation inside closing quotes stays attached
    const auto quoted = splitter.split("She said \"go.\" Then he went.");
    REQUIRE(quoted.size() == 2);
    CHECK(quoted[0] == "She said \"go.\"");
}

TEST_CASE("whitespace is normalized before splitting") {
    SentenceSplitter splitter;
    const auto got = splitter.split("  A  b.\n\nC   d. ");
    REQUIRE(got.size() == 2);
    CHECK(got[0] == "A b.");
    CHECK(got[1] == "C d.");
}

TEST_CASE("splitting is idempotent over rejoined output") {
    SentenceSplitter splitter;
    const char* samples[] = {
        "A b. C d.",
        "Dr. Smith arrived. He left. Then Mrs. Jones came in! Did she?",
        "One sentence only",
        "It was 1981. 1982 followed. The U.S. took note. \"Quotes too.\"",
    };
    for (const char* sample : samples) {
        const auto once = splitter.split(sample);
        std::string rejoined;
        for (std::size_t i = 0; i < once.size(); ++i) {
            if (i) rejoined += ' ';
            rejoined += once[i];
        }
        CHECK(splitter.split(rejoined) == once);
        // joining reproduces the normalized input
        CHECK(rejoined == normalize_whitespace(sample));
    }
}

TEST_CASE("truncation keeps a prefix") {
    std::vector<std::string> eight;
    for (int i = 0; i < 8; ++i) eight.push_back("s" + std::to_string(i + 1));
    CHECK(truncate_sentences(eight, 6).size() == 6);
    CHECK(truncate_sentences(eight, 6)[5] == "s6");
    std::vector<std::string> three = {"a", "b", "c"};
    CHECK(truncate_sentences(three, 6) == three);
    CHECK(truncate_sentences(three, 1) == std::vector<std::string>{"a"});
    CHECK_THROWS_AS(truncate_sentences(three, 0), DataError);
}

TEST_CASE("abbreviation file overrides the built-ins") {
    const std::string path = "test_abbrev.txt";
    {
        std::ofstream out(path);
        out << "# comment line\nZzz.\n";
    }
    auto splitter = SentenceSplitter::from_file(path);
    CHECK(splitter.split("Zzz. Keep going. Stop.").size() == 2);
    // default list is replaced: "Dr." now ends a sentence
    CHECK(splitter.split("Dr. Smith arrived. He left.").size() == 3);
    std::remove(path.c_str());
}
