// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "capmine/digest.hpp"
#include "capmine/error.hpp"
#include "capmine/timefmt.hpp"
#include "doctest.h"

using namespace capmine;

TEST_SUITE("basics") {
    TEST_CASE("sha256 known vectors") {
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        Sha256 h;
        h.update("a");
        h.update("bc");
        CHECK(h.hex_digest() == sha256_hex("abc"));
    }

    TEST_CASE("timestamps parse as UTC") {
        CHECK(parse_timestamp("1970-01-01 00:00:00") == 0);
        CHECK(parse_timestamp("2016-03-01 00:00:00") == 1456790400);
        CHECK(parse_timestamp("2016-03-01 01:00:00") == 1456794000);
        CHECK(parse_timestamp("2016-02-29 12:00:00").has_value());
        CHECK_FALSE(parse_timestamp("2015-02-29 12:00:00"));
        CHECK_FALSE(parse_timestamp("2016-03-01T00:00:00"));
        CHECK_FALSE(parse_timestamp("2016-03-01 24:00:00"));
        CHECK_FALSE(parse_timestamp("2016-3-01 00:00:00"));
        CHECK_FALSE(parse_timestamp(""));
        CHECK(format_timestamp(1456794000) == "2016-03-01 01:00:00");
        for (EpochSeconds t : {EpochSeconds{0}, EpochSeconds{951782400}, EpochSeconds{4102444799}})
            CHECK(parse_timestamp(format_timestamp(t)) == t);
    }

    TEST_CASE("errors carry code and location") {
        const Error e(ErrorCode::BadRow, "too few fields", "data.csv", 7);
        CHECK(e.code() == ErrorCode::BadRow);
        CHECK(e.line() == 7);
        CHECK(e.file() == "data.csv");
        CHECK(std::string(e.what()) == "data.csv:7: BadRow: too few fields");
        CHECK(code_name(ErrorCode::MissingChunks) == "MissingChunks");
        CHECK(std::string(Error(ErrorCode::NotFound, "x").what()) == "NotFound: x");
    }
}
