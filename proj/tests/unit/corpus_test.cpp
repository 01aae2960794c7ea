#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "replykit/corpus.hpp"
#include "replykit/error.hpp"
#include "replykit/rng.hpp"
#include "replykit/text.hpp"
#include "synthetic.hpp"

using namespace replykit;
namespace ts = replykit::testsupport;

namespace {

corpus::MessagePair pair_of(const std::string& message, const std::string& reply) {
  corpus::MessagePair p;
  p.message = message;
  p.reply = reply;
  return p;
}

std::string comment_line(const std::string& id, const std::string& parent, const std::string& body,
                         int score, const std::string& thread = "t1") {
  std::ostringstream os;
  os << "{\"id\":\"" << id << "\"";
  if (!parent.empty()) os << ",\"parent_id\":\"" << parent << "\"";
  os << ",\"body\":\"" << body << "\",\"score\":" << score
     << ",\"created_utc\":100,\"link_id\":\"" << thread << "\"}";
  return os.str();
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("parse_dump field passthrough and malformed counting") {
  std::istringstream in(
      comment_line("a1", "", "hi", 3) + "\n" +
      comment_line("a2", "a1", "yo", 1) + "\n" +
      "garbage line\n" +
      comment_line("a3", "a2", "ok", 2) + "\n");
  const corpus::ParseResult result = corpus::parse_dump(in);
  CHECK(result.comments.size() == 3);
  CHECK(result.malformed == 1);
  CHECK(result.comments[0].body == "hi");
  CHECK(result.comments[0].score == 3);
  CHECK(result.comments[0].thread_id == "t1");
  CHECK_FALSE(result.comments[0].parent_id.has_value());
  CHECK(result.comments[1].parent_id == "a1");
}

TEST_CASE("parse_dump empty input") {
  std::istringstream in("");
  const corpus::ParseResult result = corpus::parse_dump(in);
  CHECK(result.comments.empty());
  CHECK(result.malformed == 0);
}

TEST_CASE("parse_dump strips type prefixes and enforces invariants") {
  std::istringstream in(
      "{\"id\":\"t1_x1\",\"body\":\"a\",\"score\":1,\"created_utc\":1,\"link_id\":\"t3_th\"}\n"
      "{\"id\":\"x2\",\"parent_id\":\"t1_x1\",\"body\":\"b\",\"score\":1,\"created_utc\":1,"
      "\"link_id\":\"th\"}\n"
      "{\"id\":\"x3\",\"parent_id\":\"x3\",\"body\":\"self\",\"score\":1,\"created_utc\":1,"
      "\"link_id\":\"th\"}\n");
  const corpus::ParseResult result = corpus::parse_dump(in);
  CHECK(result.comments.size() == 2);
  CHECK(result.malformed == 1);  // id == parent_id
  CHECK(result.comments[0].id == "x1");
  CHECK(result.comments[0].thread_id == "th");
  CHECK(result.comments[1].parent_id == "x1");
}

TEST_CASE("build_pairs resolves chains and counts orphans") {
  std::istringstream in(
      comment_line("a", "", "A body", 5) + "\n" +
      comment_line("b", "a", "B body", 4) + "\n" +
      comment_line("c", "b", "C body", 3) + "\n" +
      comment_line("d", "nope", "orphan", 2) + "\n");
  const auto parsed = corpus::parse_dump(in);
  const corpus::PairResult result = corpus::build_pairs(parsed.comments);
  REQUIRE(result.pairs.size() == 2);
  CHECK(result.orphans == 1);
  CHECK(result.pairs[0].pair.message == "A body");
  CHECK(result.pairs[0].pair.reply == "B body");
  CHECK(result.pairs[0].parent_score == 5);
  CHECK(result.pairs[0].child_score == 4);
  CHECK(result.pairs[1].pair.message == "B body");
  CHECK(result.pairs[1].pair.reply == "C body");
  CHECK(result.pairs[1].pair.source_ids == std::make_pair(std::string("b"), std::string("c")));
}

TEST_CASE("build_pairs ignores cross-thread parents and input order") {
  std::istringstream in(
      comment_line("b", "a", "child first", 1, "th1") + "\n" +
      comment_line("a", "", "parent later", 1, "th1") + "\n" +
      comment_line("c", "a", "wrong thread", 1, "th2") + "\n");
  const auto parsed = corpus::parse_dump(in);
  const corpus::PairResult result = corpus::build_pairs(parsed.comments);
  CHECK(result.pairs.size() == 1);  // order within the dump does not matter
  CHECK(result.orphans == 1);       // "c" points at a parent in another thread
}

TEST_CASE("build_pairs matches brute-force edge enumeration on random trees") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<corpus::RawComment> comments;
    for (std::size_t i = 0; i < n; ++i) {
      corpus::RawComment c;
      c.id = "n" + std::to_string(i);
      c.thread_id = "tree";
      c.body = "body " + std::to_string(i);
      c.score = 1;
      if (i > 0 && rng.uniform() < 0.9) {
        c.parent_id = "n" + std::to_string(rng.below(i));  // parent among earlier nodes
      } else if (i > 0) {
        c.parent_id = "missing" + std::to_string(i);  // orphan
      }
      comments.push_back(std::move(c));
    }
    const corpus::PairResult result = corpus::build_pairs(comments);

    std::size_t edges = 0;
    for (const auto& child : comments) {
      if (!child.parent_id) continue;
      for (const auto& parent : comments) {
        if (parent.id == *child.parent_id) {
          ++edges;
          break;
        }
      }
    }
    CHECK(result.pairs.size() == edges);
  }
}

TEST_CASE("apply_filters drop reasons") {
  corpus::FilterConfig config;

  SUBCASE("deletion markers, prefix on trimmed body") {
    auto d = corpus::apply_filters(pair_of("fine", "[deleted] nothing"), 5, 5, config);
    CHECK_FALSE(d.keep);
    CHECK(d.reason == corpus::DropReason::Deleted);

    d = corpus::apply_filters(pair_of("  [removed] x", "fine"), 5, 5, config);
    CHECK(d.reason == corpus::DropReason::Deleted);

    // Marker in the middle does not delete.
    d = corpus::apply_filters(pair_of("this was [removed] later", "fine"), 5, 5, config);
    CHECK(d.keep);
  }

  SUBCASE("low score on either side") {
    auto d = corpus::apply_filters(pair_of("a", "b"), 5, 0, config);
    CHECK(d.reason == corpus::DropReason::LowScore);
    d = corpus::apply_filters(pair_of("a", "b"), 0, 5, config);
    CHECK(d.reason == corpus::DropReason::LowScore);
    d = corpus::apply_filters(pair_of("a", "b"), 1, 1, config);
    CHECK(d.keep);
  }

  SUBCASE("toxicity thresholds") {
    auto fixed = [](double v) {
      return [v](const std::string&) -> std::optional<double> { return v; };
    };
    auto d = corpus::apply_filters(pair_of("a", "b"), 5, 3, config, fixed(0.95));
    CHECK(d.reason == corpus::DropReason::Toxic);
    d = corpus::apply_filters(pair_of("a", "b"), 5, 3, config, fixed(0.9));
    CHECK(d.keep);  // strictly greater than 0.9 drops
    d = corpus::apply_filters(pair_of("a", "b"), 5, 3, config, fixed(0.1), fixed(0.55));
    CHECK(d.reason == corpus::DropReason::Toxic);  // secondary threshold is 0.5
    d = corpus::apply_filters(pair_of("a", "b"), 5, 3, config, fixed(0.1), fixed(0.5));
    CHECK(d.keep);
  }

  SUBCASE("scorer failure routes to the error counter, not Toxic") {
    auto failing = [](const std::string&) -> std::optional<double> { return std::nullopt; };
    auto d = corpus::apply_filters(pair_of("a", "b"), 5, 3, config, failing);
    CHECK_FALSE(d.keep);  // strict default drops
    CHECK_FALSE(d.reason.has_value());
    CHECK(d.scorer_error);

    corpus::FilterConfig lenient = config;
    lenient.drop_on_scorer_error = false;
    d = corpus::apply_filters(pair_of("a", "b"), 5, 3, lenient, failing);
    CHECK(d.keep);
    CHECK(d.scorer_error);

    // A definitive toxic score on one side wins over a failure on the other.
    auto fail_on_reply = [](const std::string& text) -> std::optional<double> {
      if (text == "bad grobex") return 0.99;
      return std::nullopt;
    };
    d = corpus::apply_filters(pair_of("bad grobex", "other"), 5, 3, config, fail_on_reply);
    CHECK(d.reason == corpus::DropReason::Toxic);
  }

  SUBCASE("check order: deleted before low score before toxic") {
    auto hot = [](const std::string&) -> std::optional<double> { return 1.0; };
    auto d = corpus::apply_filters(pair_of("[removed]", "b"), 0, 0, config, hot);
    CHECK(d.reason == corpus::DropReason::Deleted);
    d = corpus::apply_filters(pair_of("a", "b"), 0, 5, config, hot);
    CHECK(d.reason == corpus::DropReason::LowScore);
  }
}

TEST_CASE("assign_language thresholds") {
  auto detector = [](const std::string& text) {
    std::map<std::string, double> scores;
    if (text.find("klar") != std::string::npos) {
      scores["de"] = 0.71;
      scores["en"] = 0.29;
    } else if (text.find("maybe") != std::string::npos) {
      scores["en"] = 0.5;
      scores["de"] = 0.4;
    } else {
      scores["en"] = 0.95;
      scores["de"] = 0.05;
    }
    return scores;
  };

  auto kept = corpus::assign_language(pair_of("hello", "world"), detector, 0.7);
  REQUIRE(kept.has_value());
  CHECK(kept->language == "en");
  CHECK(kept->lang_confidence == doctest::Approx(0.95));

  CHECK_FALSE(corpus::assign_language(pair_of("maybe", "so"), detector, 0.7).has_value());

  auto boundary = corpus::assign_language(pair_of("klar", "gut"), detector, 0.7);
  REQUIRE(boundary.has_value());  // 0.71 > 0.7
  CHECK(boundary->language == "de");

  auto empty_detector = [](const std::string&) { return std::map<std::string, double>{}; };
  CHECK_THROWS_AS(corpus::assign_language(pair_of("a", "b"), empty_detector, 0.7), ConfigError);
}

TEST_CASE("split arithmetic, determinism and exact partition") {
  auto make_pairs = [](std::size_t n) {
    std::vector<corpus::MessagePair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      pairs.push_back(pair_of("m" + std::to_string(i), "r" + std::to_string(i)));
    }
    return pairs;
  };

  corpus::SplitSpec spec;
  spec.seed = 9;

  const corpus::Splits ten = corpus::split(make_pairs(10), spec);
  CHECK(ten.train.size() == 8);
  CHECK(ten.valid.size() == 1);
  CHECK(ten.test.size() == 1);

  // 12,345 pairs: valid/test get floor(1234.5), the remainder goes to train.
  const corpus::Splits big = corpus::split(make_pairs(12345), spec);
  CHECK(big.train.size() == 9877);
  CHECK(big.valid.size() == 1234);
  CHECK(big.test.size() == 1234);

  const corpus::Splits again = corpus::split(make_pairs(12345), spec);
  CHECK(again.train.size() == big.train.size());
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(again.train[i].message == big.train[i].message);
  }

  // Exact partition: every input pair lands in exactly one split.
  std::set<std::string> seen;
  for (const auto* part : {&big.train, &big.valid, &big.test}) {
    for (const auto& p : *part) CHECK(seen.insert(p.message).second);
  }
  CHECK(seen.size() == 12345);

  corpus::SplitSpec bad;
  bad.train = 0.5;
  bad.valid = 0.3;
  bad.test = 0.3;
  CHECK_THROWS_AS(corpus::split(make_pairs(5), bad), ConfigError);
}

TEST_CASE("build_response_set thresholds, ordering and cap") {
  std::vector<corpus::MessagePair> pairs;
  auto add = [&](const std::string& reply, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) pairs.push_back(pair_of("m", reply));
  };
  add("Thanks!", 25);
  add("ok then", 19);
  add(" Thanks!  ", 5);  // trims into the first entry: 30 total
  add("lol", 40);
  add("same", 21);

  const corpus::ResponseSet set = corpus::build_response_set(pairs, 20, 50000, "");
  REQUIRE(set.entries.size() == 3);
  CHECK(set.entries[0] == std::make_pair(std::string("lol"), std::size_t{40}));
  CHECK(set.entries[1] == std::make_pair(std::string("Thanks!"), std::size_t{30}));
  CHECK(set.entries[2] == std::make_pair(std::string("same"), std::size_t{21}));

  const corpus::ResponseSet capped = corpus::build_response_set(pairs, 20, 2, "");
  REQUIRE(capped.entries.size() == 2);
  CHECK(capped.entries[0].first == "lol");
  CHECK(capped.entries[1].first == "Thanks!");

  const corpus::ResponseSet none = corpus::build_response_set(pairs, 100, 10, "");
  CHECK(none.entries.empty());  // warning case, not an error

  // Ties break lexicographically.
  std::vector<corpus::MessagePair> tied;
  for (int i = 0; i < 3; ++i) {
    tied.push_back(pair_of("m", "beta"));
    tied.push_back(pair_of("m", "alpha"));
  }
  const corpus::ResponseSet t = corpus::build_response_set(tied, 1, 10, "");
  CHECK(t.entries[0].first == "alpha");
  CHECK(t.entries[1].first == "beta");
}

TEST_CASE("augment_response_set merges identical translations") {
  corpus::ResponseSet source;
  source.entries = {{"thanks", 30}, {"thank you", 25}, {"ok", 22}, {"fails", 21}, {"yes", 20}};
  source.min_count = 20;
  source.max_size = 50000;

  auto translator = [](const std::string& text) -> std::optional<std::string> {
    if (text == "thanks" || text == "thank you") return "danke";
    if (text == "fails") return std::nullopt;
    return "de:" + text;
  };

  const corpus::AugmentResult result = corpus::augment_response_set(source, translator, "de");
  CHECK(result.skipped == 1);
  REQUIRE(result.set.entries.size() == 3);
  CHECK(result.set.entries[0] == std::make_pair(std::string("danke"), std::size_t{55}));
  CHECK(result.set.language == "de");

  auto identity = [](const std::string& text) -> std::optional<std::string> { return text; };
  const corpus::AugmentResult same = corpus::augment_response_set(source, identity, "en");
  REQUIRE(same.set.entries.size() == source.entries.size());
  CHECK(same.skipped == 0);
  CHECK(same.set.entries[0] == source.entries[0]);
}

TEST_CASE("corpus_stats") {
  CHECK(corpus::corpus_stats({}).examples == 0);
  CHECK(corpus::corpus_stats({}).tokens == 0);

  std::vector<corpus::MessagePair> pairs = {pair_of("a b", "c")};
  pairs[0].language = "en";
  const corpus::CorpusStats stats = corpus::corpus_stats(pairs);
  CHECK(stats.examples == 1);
  CHECK(stats.tokens == 3);
  CHECK(stats.per_language.at("en") == 1);
}

TEST_CASE("corpus_stats matches an independent recount on a fixture") {
  Rng rng(31);
  std::vector<corpus::MessagePair> pairs;
  std::size_t expected_tokens = 0;
  for (int i = 0; i < 100; ++i) {
    corpus::MessagePair p = pair_of(ts::sentence(rng, ts::lexicon_aa(), 1 + rng.below(7)),
                                    ts::sentence(rng, ts::lexicon_aa(), 1 + rng.below(7)));
    p.language = i % 3 == 0 ? "bb" : "aa";
    // Independent token count: split on spaces by hand.
    for (const std::string* side : {&p.message, &p.reply}) {
      std::istringstream words(*side);
      std::string w;
      while (words >> w) ++expected_tokens;
    }
    pairs.push_back(std::move(p));
  }
  const corpus::CorpusStats stats = corpus::corpus_stats(pairs);
  CHECK(stats.examples == 100);
  CHECK(stats.tokens == expected_tokens);
  CHECK(stats.per_language.at("aa") + stats.per_language.at("bb") == 100);
}

TEST_CASE("run_pipeline keeps no pair that violates a threshold") {
  const langid::LangIdModel model = ts::fixture_langid_model();
  corpus::PipelineConfig config;
  config.detector = ts::fixture_detector(model);
  config.toxicity_primary = ts::marker_scorer(ts::kPrimaryToxicMarker);
  config.toxicity_secondary = ts::marker_scorer(ts::kSecondaryToxicMarker);

  std::istringstream dump(ts::fixture_dump_contents());
  const corpus::PipelineResult result = corpus::run_pipeline(dump, config);

  CHECK(result.counters.kept > 0);
  CHECK(result.counters.malformed > 0);
  CHECK(result.counters.dropped_deleted > 0);
  CHECK(result.counters.dropped_low_score > 0);
  CHECK(result.counters.dropped_toxic > 0);
  CHECK(result.counters.dropped_low_lang_confidence > 0);
  CHECK(result.counters.orphans > 0);

  for (const corpus::MessagePair& pair : result.kept) {
    CHECK(pair.lang_confidence >= 0.7);
    CHECK_FALSE(pair.language.empty());
    for (const std::string* side : {&pair.message, &pair.reply}) {
      CHECK(side->find(ts::kPrimaryToxicMarker) == std::string::npos);
      CHECK(side->find("[removed]") != 0);
      CHECK(side->find("[deleted]") != 0);
    }
  }
  CHECK(result.counters.empty_text_drops > 0);
  CHECK(result.counters.kept + result.counters.empty_text_drops +
            result.counters.dropped_deleted + result.counters.dropped_low_score +
            result.counters.dropped_toxic + result.counters.dropped_low_lang_confidence +
            result.counters.scorer_error_drops ==
        result.counters.pairs);
  for (const corpus::MessagePair& pair : result.kept) {
    CHECK_FALSE(std::string(text::trim(pair.message)).empty());
    CHECK_FALSE(std::string(text::trim(pair.reply)).empty());
  }
}

TEST_CASE("fuzz: no retained pair violates any filter threshold") {
  const langid::LangIdModel model = ts::fixture_langid_model();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(4000 + seed);
    std::vector<corpus::RawComment> comments;
    std::map<std::string, const corpus::RawComment*> by_id;
    for (int t = 0; t < 20; ++t) {
      const std::string thread = "t" + std::to_string(t);
      std::string parent;
      const std::size_t depth = 1 + rng.below(6);
      for (std::size_t d = 0; d < depth; ++d) {
        corpus::RawComment c;
        c.id = "c" + std::to_string(comments.size());
        c.thread_id = thread;
        if (!parent.empty()) c.parent_id = parent;
        c.score = static_cast<int>(rng.below(6)) - 1;  // -1..4
        switch (rng.below(6)) {
          case 0: c.body = "[removed] " + ts::sentence(rng, ts::lexicon_aa(), 3); break;
          case 1: c.body = ts::sentence(rng, ts::lexicon_aa(), 2) + " " + ts::kPrimaryToxicMarker; break;
          case 2: c.body = ts::mixed_sentence(rng, 6); break;
          default: c.body = ts::sentence(rng, rng.below(2) ? ts::lexicon_aa() : ts::lexicon_bb(),
                                         2 + rng.below(5));
        }
        comments.push_back(std::move(c));
        parent = comments.back().id;
      }
    }
    for (const auto& c : comments) by_id[c.id] = &c;

    corpus::PipelineConfig config;
    config.detector = ts::fixture_detector(model);
    config.toxicity_primary = ts::marker_scorer(ts::kPrimaryToxicMarker);
    config.toxicity_secondary = ts::marker_scorer(ts::kSecondaryToxicMarker);
    corpus::PairResult paired = corpus::build_pairs(comments);
    const corpus::PipelineResult result = corpus::filter_pairs(std::move(paired.pairs), config);

    for (const corpus::MessagePair& pair : result.kept) {
      // Thresholds hold on every retained pair.
      CHECK(pair.lang_confidence >= 0.7);
      const corpus::RawComment* parent = by_id.at(pair.source_ids.first);
      const corpus::RawComment* child = by_id.at(pair.source_ids.second);
      CHECK(parent->score >= 1);
      CHECK(child->score >= 1);
      for (const std::string* body : {&pair.message, &pair.reply}) {
        CHECK_FALSE(std::string_view(text::trim(*body)).starts_with("[removed]"));
        CHECK_FALSE(std::string_view(text::trim(*body)).starts_with("[deleted]"));
        CHECK(body->find(ts::kPrimaryToxicMarker) == std::string::npos);
        CHECK(body->find(ts::kSecondaryToxicMarker) == std::string::npos);
      }
    }
  }
}

TEST_CASE("pipeline is a pure function of its inputs") {
  const langid::LangIdModel model = ts::fixture_langid_model();
  corpus::PipelineConfig config;
  config.detector = ts::fixture_detector(model);
  config.toxicity_primary = ts::marker_scorer(ts::kPrimaryToxicMarker);

  std::istringstream dump1(ts::fixture_dump_contents());
  std::istringstream dump2(ts::fixture_dump_contents());
  const corpus::PipelineResult a = corpus::run_pipeline(dump1, config);
  const corpus::PipelineResult b = corpus::run_pipeline(dump2, config);

  REQUIRE(a.kept.size() == b.kept.size());
  std::ostringstream out_a, out_b;
  corpus::write_pairs(out_a, a.kept);
  corpus::write_pairs(out_b, b.kept);
  CHECK(out_a.str() == out_b.str());  // byte-identical
}

TEST_CASE("checked-in fixture matches its generator") {
  std::ifstream in(std::string(REPLYKIT_TEST_DATA_DIR) + "/fixture_dump.ndjson", std::ios::binary);
  REQUIRE(in.good());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(bytes == ts::fixture_dump_contents());
}

TEST_CASE("pair and response-set files round trip") {
  std::vector<corpus::MessagePair> pairs = {pair_of("hello there", "hi"),
                                            pair_of("with \"quotes\"", "and\nnewlines")};
  pairs[0].language = "en";
  pairs[0].lang_confidence = 0.93;
  pairs[1].language = "de";
  pairs[1].lang_confidence = 0.81;

  std::ostringstream out;
  corpus::write_pairs(out, pairs);
  std::istringstream in(out.str());
  const auto loaded = corpus::read_pairs(in);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].message == "hello there");
  CHECK(loaded[0].language == "en");
  CHECK(loaded[0].lang_confidence == doctest::Approx(0.93));
  CHECK(loaded[1].reply == "and\nnewlines");

  corpus::ResponseSet set;
  set.entries = {{"tab\there", 30}, {"plain", 25}, {"multi\nline", 20}};
  std::ostringstream rs_out;
  corpus::write_response_set(rs_out, set);
  std::istringstream rs_in(rs_out.str());
  const corpus::ResponseSet rs = corpus::read_response_set(rs_in, "en");
  REQUIRE(rs.entries.size() == 3);
  CHECK(rs.entries[0] == std::make_pair(std::string("tab\there"), std::size_t{30}));
  CHECK(rs.entries[2] == std::make_pair(std::string("multi\nline"), std::size_t{20}));

  std::istringstream bad("no tab separated count\n");
  CHECK_THROWS_AS(corpus::read_response_set(bad, "en"), DataError);
}

}  // TEST_SUITE
