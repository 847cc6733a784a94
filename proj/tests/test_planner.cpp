// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "pathclip/css.hpp"
#include "pathclip/error.hpp"
#include "pathclip/io.hpp"
#include "pathclip/planner.hpp"
#include "test_support.hpp"

namespace pathclip {
namespace {

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

const Exemplar kExemplar{
    "a cat next to a dog",
    "cat [cx: 8px, cy: 8px, w: 8px, h: 8px, clip-path: polygon(4px 4px, 12px 4px, 12px 12px, 4px 12px)]\n"
    "dog [cx: 24px, cy: 24px, w: 8px, h: 8px, clip-path: polygon(20px 20px, 28px 20px, 28px 28px, 20px 28px)]"};

TEST(BuildPrompt, StructureAndDeterminism) {
  const std::string p = build_prompt("a cat", {kExemplar}, "Lay out the objects.");
  EXPECT_EQ(count_occurrences(p, "Input:"), 2u);
  EXPECT_EQ(p.find("Lay out the objects."), 0u);
  EXPECT_LT(p.find(kExemplar.input_prompt), p.find("Input: a cat\nOutput:"));
  EXPECT_EQ(p.substr(p.size() - std::string("Input: a cat\nOutput:").size()), "Input: a cat\nOutput:");
  EXPECT_EQ(p, build_prompt("a cat", {kExemplar}, "Lay out the objects."));
  PromptTemplate tmpl{"Lay out the objects.", {kExemplar}, "a cat"};
  EXPECT_EQ(build_prompt(tmpl), p);
}

TEST(BuildPrompt, Errors) {
  try {
    build_prompt("a cat", {}, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyExemplars);
  }
  try {
    build_prompt("a cat", {{"in", "cat [cx: 1px]"}}, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidExemplar);
  }
}

TEST(BuildPrompt, DefaultExemplarsAreValid) {
  EXPECT_FALSE(default_instruction().empty());
  EXPECT_FALSE(default_exemplars().empty());
  EXPECT_NO_THROW(build_prompt("a red square", default_exemplars(), default_instruction()));
}

TEST(ParseResponse, TwoBlocks) {
  const LayoutScene s = parse_response("Here you go:\n" + kExemplar.output_layout + "\n", 32, 32, "a cat and a dog");
  ASSERT_EQ(s.primitives.size(), 2u);
  EXPECT_EQ(s.primitives[0].appearance.category(), "cat");
  EXPECT_EQ(s.primitives[1].appearance.category(), "dog");
  EXPECT_EQ(s.global_caption, "a cat and a dog");
  EXPECT_EQ(s.canvas_w, 32);
}

TEST(ParseResponse, MalformedBlockIsLocalized) {
  const std::string text =
      "cat [cx: 8px, cy: 8px, w: 8px, h: 8px, clip-path: polygon(4px 4px, 12px 4px, 12px 12px, 4px 12px)]\n"
      "dog [cx: 24px, cy: oops, w: 8px, h: 8px, clip-path: polygon(20px 20px, 28px 20px, 28px 28px, 20px 28px)]\n"
      "owl [cx: 8px, cy: 24px, w: 8px, h: 8px, clip-path: polygon(4px 20px, 12px 20px, 12px 28px, 4px 28px)]\n";
  try {
    parse_response(text, 32, 32);
    FAIL();
  } catch (const Error& e) {
    ASSERT_TRUE(e.index().has_value());
    EXPECT_EQ(*e.index(), 2u);
    EXPECT_NE(std::string(e.what()).find("block 2"), std::string::npos);
  }
}

TEST(ParseResponse, NoBlocksAndClamping) {
  try {
    parse_response("I cannot help with that.", 32, 32);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPrimitivesFound);
  }
  const LayoutScene s = parse_response(
      "cat [cx: 8px, cy: 8px, w: 8px, h: 8px, clip-path: polygon(-4px 4px, 40px 4px, 12px 12px, 4px 12px)]", 32, 32);
  for (const Point& p : s.primitives[0].path.clip_points) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.x, 32.0);
  }
}

TEST(ParseResponse, RoundTripThroughExemplarFormat) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    LayoutScene scene;
    scene.canvas_w = scene.canvas_h = 64;
    scene.global_caption = "prompt";
    const int n = testing::uniform_int(rng, 1, 4);
    for (int i = 0; i < n; ++i) scene.primitives.push_back(testing::random_canonical_primitive(rng, 64.0));
    EXPECT_EQ(parse_response(format_layout(scene), 64, 64, "prompt"), scene);
  }
}

TEST(ValidateScene, Warnings) {
  LayoutScene s = parse_response(kExemplar.output_layout, 32, 32);
  EXPECT_TRUE(validate_scene(s).empty());

  LayoutScene dup = s;
  dup.primitives[1] = dup.primitives[0];
  const auto w = validate_scene(dup);
  bool overlap = false;
  for (const auto& x : w) {
    if (x.kind == SceneWarning::Kind::kOverlap) {
      overlap = true;
      EXPECT_DOUBLE_EQ(x.iou, 1.0);
    }
  }
  EXPECT_TRUE(overlap);

  LayoutScene out = s;
  out.primitives[0].path.clip_points[1] = {32 + 5, 0};
  const LayoutScene before = out;
  const auto w2 = validate_scene(out);
  ASSERT_FALSE(w2.empty());
  EXPECT_EQ(w2[0].kind, SceneWarning::Kind::kOutOfCanvas);
  EXPECT_EQ(out, before);
}

TEST(PromptDigest, Sha256Hex) {
  EXPECT_EQ(prompt_digest("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(prompt_digest(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(FixtureBackend, ReplayIsDeterministic) {
  testing::TempDir dir;
  FixtureBackend backend(dir.path());
  const std::string prompt = build_prompt("a cat next to a dog", default_exemplars(), default_instruction());
  backend.record(prompt, kExemplar.output_layout);
  EXPECT_TRUE(std::filesystem::exists(dir / (prompt_digest(prompt) + ".txt")));
  const LayoutScene a = plan_scene(backend, "a cat next to a dog", 32, 32);
  const LayoutScene b = plan_scene(backend, "a cat next to a dog", 32, 32);
  EXPECT_EQ(scene_to_json(a), scene_to_json(b));
  EXPECT_EQ(a.primitives.size(), 2u);
  try {
    plan_scene(backend, "something unrecorded", 32, 32);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFixtureNotFound);
  }
}

TEST(MakeBackend, Kinds) {
  EXPECT_NE(dynamic_cast<FixtureBackend*>(make_backend("mock", "x", {}).get()), nullptr);
  RemoteOptions remote;
  remote.url = "http://127.0.0.1:1/complete";
  EXPECT_NE(dynamic_cast<RemoteBackend*>(make_backend("remote", "x", remote).get()), nullptr);
  EXPECT_THROW(make_backend("gpt", "x", {}), Error);
  EXPECT_THROW(RemoteBackend(RemoteOptions{}), Error);
}

// Local completion server for the remote backend.
class PlannerServer {
 public:
  explicit PlannerServer(int fail_first = 0) : fail_first_(fail_first) {
    server_.Post("/complete", [this](const httplib::Request& req, httplib::Response& res) {
      const int active = ++active_;
      int seen = max_active_.load();
      while (active > seen && !max_active_.compare_exchange_weak(seen, active)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
      --active_;
      if (calls_++ < fail_first_) {
        res.status = 503;
        return;
      }
      auth_ = req.get_header_value("Authorization");
      const auto body = nlohmann::json::parse(req.body);
      last_max_tokens_ = body.at("max_tokens").get<int>();
      last_prompt_ = body.at("prompt").get<std::string>();
      res.set_content(nlohmann::json{{"text", kExemplar.output_layout}}.dump(), "application/json");
    });
    server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"nope\": 1}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~PlannerServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path = "/complete") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  int calls() const { return calls_; }
  int max_active() const { return max_active_; }
  void set_delay(int ms) { delay_ms_ = ms; }

  std::string auth_;
  std::string last_prompt_;
  int last_max_tokens_ = 0;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int fail_first_;
  std::atomic<int> calls_{0};
  std::atomic<int> active_{0};
  std::atomic<int> max_active_{0};
  std::atomic<int> delay_ms_{0};
};

TEST(RemoteBackend, PostsPromptAndParsesReply) {
  PlannerServer server;
  RemoteOptions opts;
  opts.url = server.url();
  opts.api_key = "secret";
  opts.max_tokens = 77;
  RemoteBackend backend(opts);
  const LayoutScene s = plan_scene(backend, "a cat next to a dog", 32, 32);
  EXPECT_EQ(s.primitives.size(), 2u);
  EXPECT_EQ(server.auth_, "Bearer secret");
  EXPECT_EQ(server.last_max_tokens_, 77);
  EXPECT_NE(server.last_prompt_.find("Input: a cat next to a dog\nOutput:"), std::string::npos);
}

TEST(RemoteBackend, RetriesServerErrors) {
  PlannerServer server(2);
  RemoteOptions opts;
  opts.url = server.url();
  opts.retries = 2;
  RemoteBackend backend(opts);
  EXPECT_EQ(backend.complete("p"), kExemplar.output_layout);
  EXPECT_EQ(server.calls(), 3);

  PlannerServer failing(5);
  opts.url = failing.url();
  opts.retries = 1;
  RemoteBackend give_up(opts);
  try {
    give_up.complete("p");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBackendFailure);
  }
  EXPECT_EQ(failing.calls(), 2);
}

TEST(RemoteBackend, MalformedReplyAndUnreachableHost) {
  PlannerServer server;
  RemoteOptions opts;
  opts.url = server.url("/bad");
  RemoteBackend bad(opts);
  EXPECT_THROW(bad.complete("p"), Error);

  opts.url = server.url("/missing");
  RemoteBackend missing(opts);
  EXPECT_THROW(missing.complete("p"), Error);

  opts.url = "http://127.0.0.1:1/complete";
  opts.retries = 0;
  opts.timeout = std::chrono::milliseconds(500);
  RemoteBackend unreachable(opts);
  EXPECT_THROW(unreachable.complete("p"), Error);
}

TEST(RemoteBackend, BoundsRequestsInFlight) {
  PlannerServer server;
  server.set_delay(50);
  RemoteOptions opts;
  opts.url = server.url();
  opts.max_in_flight = 2;
  RemoteBackend backend(opts);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&] {
      if (backend.complete("p") == kExemplar.output_layout) ++ok;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 6);
  EXPECT_LE(server.max_active(), 2);
}

}  // namespace
}  // namespace pathclip
