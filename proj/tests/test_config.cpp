#include <catch_amalgamated.hpp>

#include "goemo/config.hpp"
#include "goemo/error.hpp"
#include "support.hpp"

using namespace goemo;

namespace {

RunConfig sample() {
    return RunConfig("demo", {{"alpha", "1", "an integer"}, {"rate", "0.5", ""}, {"name", "", ""}, {"flag", "true", ""},
                              {"items", "a, b,,c", ""}});
}

}  // namespace

TEST_CASE("defaults and typed getters") {
    const RunConfig c = sample();
    CHECK(c.get_size("alpha") == 1);
    CHECK(c.get_double("rate") == 0.5);
    CHECK(c.get_bool("flag"));
    CHECK_FALSE(c.has("name"));
    CHECK(c.get_list("items") == std::vector<std::string>{"a", "b", "c"});
    CHECK_THROWS_AS(c.require("name"), ValidationError);
}

TEST_CASE("unknown keys are rejected") {
    RunConfig c = sample();
    CHECK_THROWS_AS(c.set("beta", "1"), ValidationError);
    CHECK_THROWS_AS(c.get("beta"), ValidationError);
}

TEST_CASE("bad values are rejected") {
    RunConfig c = sample();
    c.set("alpha", "-3");
    CHECK_THROWS_AS(c.get_size("alpha"), ValidationError);
    c.set("rate", "fast");
    CHECK_THROWS_AS(c.get_double("rate"), ValidationError);
    c.set("flag", "maybe");
    CHECK_THROWS_AS(c.get_bool("flag"), ValidationError);
}

TEST_CASE("config file loading") {
    testing::TempDir dir;
    testing::write_text(dir.file("ok.cfg"), "# comment\n\nalpha = 7\nname=x\n");
    RunConfig c = sample();
    c.load_file(dir.file("ok.cfg"));
    CHECK(c.get_size("alpha") == 7);
    CHECK(c.get("name") == "x");

    testing::write_text(dir.file("unknown.cfg"), "alpha=1\nbeta=2\n");
    try {
        sample().load_file(dir.file("unknown.cfg"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    testing::write_text(dir.file("dup.cfg"), "alpha=1\nalpha=2\n");
    CHECK_THROWS_AS(sample().load_file(dir.file("dup.cfg")), ParseError);
    testing::write_text(dir.file("noeq.cfg"), "alpha\n");
    CHECK_THROWS_AS(sample().load_file(dir.file("noeq.cfg")), ParseError);
    CHECK_THROWS_AS(sample().load_file(dir.file("absent.cfg")), Error);
}

TEST_CASE("render lists every key in schema order") {
    RunConfig c = sample();
    c.set("name", "run1");
    CHECK(c.render() == "# demo\nalpha=1\nrate=0.5\nname=run1\nflag=true\nitems=a, b,,c\n");
    testing::TempDir dir;
    c.save(dir.file("c.txt"));
    RunConfig back = sample();
    back.load_file(dir.file("c.txt"));
    CHECK(back.render() == c.render());
}
