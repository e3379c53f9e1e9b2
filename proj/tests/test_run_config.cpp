// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "ticktack/error.hpp"
#include "ticktack/run_config.hpp"

using namespace ticktack;

namespace {

void merge(RunConfig& c, const std::string& text) {
    std::istringstream in(text);
    c.merge_file(in, "test.ini");
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
        return e.what();
    }
    FAIL("no error raised");
    return {};
}

}  // namespace

TEST_CASE("defaults") {
    const RunConfig c;
    for (const auto& k : config_schema()) {
        CHECK(c.get(k.name) == k.default_value);
        CHECK(c.provenance(k.name) == Provenance::Default);
    }
    const auto t = c.training();
    CHECK(t.delta == 0.5);
    CHECK(t.sigma == 1.0);
    CHECK(t.lambda == 100.0);
    CHECK(t.learning_rate == 1e-4);
    CHECK(t.batch_size == 8);
    CHECK(t.grad_accum_steps == 2);
    CHECK(t.epochs == 10);
    CHECK(t.optimizer == Optimizer::Sgd);
    CHECK(t.injection.enabled);

    const auto p = c.pretraining();
    CHECK(p.sigma == 0.0);
    CHECK(p.lambda == 0.0);
    CHECK(!p.injection.enabled);
}

TEST_CASE("flag beats env beats file beats default") {
    RunConfig c;
    merge(c, "[training]\nepochs = 4\nsigma = 0.25\n[paths]\nout = from_file\n");
    CHECK(c.get_int("training.epochs") == 4);
    CHECK(c.provenance("training.epochs") == Provenance::File);

    c.set("paths.out", "from_env", Provenance::Env);
    CHECK(c.get("paths.out") == "from_env");
    c.set("training.epochs", "7", Provenance::Flag);
    CHECK(c.get_int("training.epochs") == 7);

    // weaker sources arriving later do not win
    merge(c, "[training]\nepochs = 2\n");
    CHECK(c.get_int("training.epochs") == 7);
    c.set("paths.out", "late_file", Provenance::File);
    CHECK(c.get("paths.out") == "from_env");
    c.set("paths.out", "flag", Provenance::Flag);
    CHECK(c.get("paths.out") == "flag");
    CHECK(c.get_real("training.sigma") == 0.25);
    CHECK(c.training().sigma == 0.25);
}

TEST_CASE("file syntax") {
    RunConfig c;
    merge(c,
          "# leading comment\n"
          "; another\n"
          "\n"
          "[run]\n"
          "  seed = 12   # trailing note\n"
          "[eval]\n"
          "probe_template = \"In {year}, Brevin traded\"\n"
          "[paths]\n"
          "corpus = data/a#b.jsonl\n"
          "[training]\n"
          "injection = false\n"
          "optimizer = adam\n");
    CHECK(c.get_int("run.seed") == 12);
    CHECK(c.get("eval.probe_template") == "In {year}, Brevin traded");
    CHECK(c.get("paths.corpus") == "data/a#b.jsonl");
    CHECK(!c.get_bool("training.injection"));
    CHECK(!c.training().injection.enabled);
    CHECK(c.training().optimizer == Optimizer::Adam);
}

TEST_CASE("errors name the key or line") {
    RunConfig c;
    CHECK(message_of([&] { merge(c, "[model]\nwidth = 3\n"); }).find("model.width") != std::string::npos);
    CHECK(message_of([&] { merge(c, "[model]\n\ndim = lots\n"); }).find("test.ini:3") != std::string::npos);
    CHECK(message_of([&] { merge(c, "[model\n"); }).find("test.ini:1") != std::string::npos);
    CHECK(message_of([&] { merge(c, "dim 3\n"); }).find("test.ini:1") != std::string::npos);
    CHECK(!message_of([&] { c.set("training.optimizer", "rmsprop", Provenance::Flag); }).empty());
    CHECK(!message_of([&] { c.set("training.injection", "maybe", Provenance::Flag); }).empty());
    CHECK(!message_of([&] { c.set("training.sigma", "1.0x", Provenance::Flag); }).empty());
    CHECK(!message_of([&] { c.set("no_section", "1", Provenance::Flag); }).empty());
    CHECK(!message_of([&] { (void)RunConfig{}.get("nope.nope"); }).empty());
    CHECK_THROWS_AS(c.load_file("/nonexistent/run.ini"), Error);
}

TEST_CASE("semantic validation happens on use") {
    RunConfig c;
    c.set("training.delta", "1.5", Provenance::Flag);
    CHECK_THROWS_AS((void)c.training(), Error);
    RunConfig m;
    m.set("model.n_heads", "5", Provenance::Flag);
    CHECK_THROWS_AS((void)m.model(100), Error);
}

TEST_CASE("written config reads back identically") {
    RunConfig c;
    c.set("training.sigma", "0.125", Provenance::Flag);
    c.set("eval.probe_template", "In {year}, Aldor traded", Provenance::File);
    c.set("paths.out", "some dir/with space", Provenance::Env);
    std::ostringstream out;
    c.write(out);
    const std::string text = out.str();
    CHECK(text.find("# flag") != std::string::npos);
    CHECK(text.find("# env") != std::string::npos);

    RunConfig back;
    merge(back, text);
    for (const auto& k : config_schema()) {
        CAPTURE(k.name);
        CHECK(back.get(k.name) == c.get(k.name));
    }
    std::ostringstream again;
    back.write(again);
    RunConfig third;
    merge(third, again.str());
    for (const auto& k : config_schema()) CHECK(third.get(k.name) == c.get(k.name));
}

TEST_CASE("help documents every key") {
    const auto help = RunConfig::help_text();
    for (const auto& k : config_schema()) {
        CAPTURE(k.name);
        const auto dot = k.name.find('.');
        REQUIRE(dot != std::string::npos);
        CHECK(help.find(k.name.substr(dot + 1)) != std::string::npos);
        CHECK(!k.help.empty());
        CHECK(help.find(k.help) != std::string::npos);
    }
}
