// Copyright 2026 The maskbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "support/service_fixture.hpp"
#include "support/test_support.hpp"

namespace maskbench {
namespace {

namespace fs = std::filesystem;
using testing::api;
using testing::post_json;

ServiceConfig config_for(const fs::path& root, bool read_only = false) {
  ServiceConfig c;
  c.dataset_root = root;
  c.read_only = read_only;
  return c;
}

nlohmann::json json_of(const httplib::Result& r) {
  EXPECT_TRUE(r);
  return nlohmann::json::parse(r->body);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected maskbench::Error";
  return ErrorCode::kInvalidArgument;
}

TEST(Service, ListsImagesWithStatus) {
  testing::TempDir dir;
  testing::write_word_dataset(dir.path(), 3);
  testing::RunningService running(config_for(dir.path()));
  auto client = running.client();
  ASSERT_TRUE(post_json(client, "/images/w01/skip", nlohmann::json::object()));
  const auto body = json_of(client.Get(api("/images")));
  EXPECT_EQ(body["dataset"], "fixture");
  ASSERT_EQ(body["images"].size(), 3u);
  EXPECT_EQ(body["images"][0], (nlohmann::json{{"image_id", "w00"}, {"status", "untagged"}}));
  EXPECT_EQ(body["images"][1]["status"], "skipped");
  EXPECT_EQ(body["counts"]["skipped"], 1);
  EXPECT_EQ(body["counts"]["untagged"], 2);
}

TEST(Service, ServesImageAndBankAsPng) {
  testing::TempDir dir;
  const fs::path manifest = testing::write_word_dataset(dir.path(), 1);
  testing::RunningService running(config_for(dir.path()));
  auto client = running.client();

  const auto img = client.Get(api("/images/w00"));
  ASSERT_TRUE(img);
  EXPECT_EQ(img->status, 200);
  EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
  const WordImage decoded = decode_image(Bytes(img->body.begin(), img->body.end()), "w00");
  const WordImage original = load_image(dir.path() / "images" / "w00.png", "w00");
  EXPECT_EQ(decoded.pixels, original.pixels);

  const auto bank = json_of(client.Get(api("/images/w00/bank?polarity=inverted")));
  ASSERT_EQ(bank["candidates"].size(), 16u);
  EXPECT_EQ(bank["polarity"], "inverted");
  const CandidateBank direct = build_bank(original, Polarity::kInverted, std::uint64_t{0});
  for (int k = 1; k <= 16; ++k) {
    EXPECT_EQ(bank["candidates"][k - 1]["method"], direct.at(k).method);
  }
  const auto cand = client.Get(bank["candidates"][6]["url"].get<std::string>());
  ASSERT_TRUE(cand);
  const Grid<std::uint8_t> gray = decode_png_gray8(Bytes(cand->body.begin(), cand->body.end()));
  for (std::size_t i = 0; i < gray.size(); ++i) ASSERT_EQ(gray[i] != 0, direct.at(7).mask[i] != 0);

  EXPECT_EQ(client.Get(api("/images/w00/bank/17"))->status, 400);
  EXPECT_EQ(client.Get(api("/images/w00/bank/0"))->status, 400);
  EXPECT_EQ(client.Get(api("/images/nope"))->status, 404);
  EXPECT_EQ(client.Get(api("/images/w00/bank?polarity=sideways"))->status, 400);
}

TEST(Service, SelectionOutOfRangeRejected) {
  testing::TempDir dir;
  testing::write_word_dataset(dir.path(), 1);
  testing::RunningService running(config_for(dir.path()));
  auto client = running.client();
  EXPECT_EQ(post_json(client, "/images/w00/selection", {{"candidate", 17}})->status, 400);
  EXPECT_EQ(post_json(client, "/images/w00/selection", {{"candidate", -1}})->status, 400);
  EXPECT_EQ(post_json(client, "/images/w00/selection", {{"candidate", "3"}})->status, 400);
  EXPECT_EQ(client.Post(api("/images/w00/selection"), "{not json", "application/json")->status, 400);
  EXPECT_EQ(post_json(client, "/images/zz/selection", {{"candidate", 1}})->status, 404);
  EXPECT_FALSE(running.service().store().draft("w00"));
}

TEST(Service, PatchAndCommitErrors) {
  testing::TempDir dir;
  testing::write_word_dataset(dir.path(), 1);
  testing::RunningService running(config_for(dir.path()));
  auto client = running.client();
  const nlohmann::json square{{"kind", "add"}, {"vertices", {{0, 0}, {4, 0}, {4, 4}, {0, 4}}}};
  EXPECT_EQ(post_json(client, "/images/w00/patch", square)->status, 409);  // nothing selected
  EXPECT_EQ(post_json(client, "/images/w00/commit", nlohmann::json::object())->status, 409);
  ASSERT_EQ(post_json(client, "/images/w00/selection", {{"candidate", 0}})->status, 200);
  EXPECT_EQ(post_json(client, "/images/w00/commit", nlohmann::json::object())->status, 409);
  EXPECT_EQ(post_json(client, "/images/w00/patch", {{"kind", "add"}, {"vertices", {{0, 0}, {1, 1}}}})->status, 400);
  EXPECT_EQ(post_json(client, "/images/w00/patch", {{"kind", "smudge"}, {"vertices", square["vertices"]}})->status,
            400);
  EXPECT_EQ(client.Get(api("/images/w00/mask"))->status, 200);
  const auto r = json_of(client.Get(api("/images/w00/annotation")));
  EXPECT_EQ(r["status"], "untagged");
  EXPECT_EQ(r["has_mask"], false);
}

// The same session driven over HTTP and through the library leaves identical
// records (apart from the timestamp) and identical masks.
TEST(Service, ScriptedSessionEqualsDirectLibraryCalls) {
  testing::TempDir http_dir;
  testing::TempDir lib_dir;
  testing::write_word_dataset(http_dir.path(), 2);
  testing::write_word_dataset(lib_dir.path(), 2);
  const Polygon add{{{1, 1}, {9, 1}, {9, 6}, {1, 6}}};
  const Polygon del{{{2.5, 2.5}, {30, 3}, {12, 14}}};

  AnnotationRecord via_http;
  {
    testing::RunningService running(config_for(http_dir.path()));
    auto client = running.client();
    ASSERT_EQ(client.Get(api("/images"))->status, 200);
    ASSERT_EQ(client.Get(api("/images/w01"))->status, 200);
    ASSERT_EQ(client.Get(api("/images/w01/bank?polarity=normal"))->status, 200);
    ASSERT_EQ(post_json(client, "/images/w01/selection", {{"candidate", 4}, {"polarity", "normal"}})->status, 200);
    auto to_json_vertices = [](const Polygon& p) {
      nlohmann::json v = nlohmann::json::array();
      for (const Vertex& q : p.vertices) v.push_back({q.x, q.y});
      return v;
    };
    ASSERT_EQ(post_json(client, "/images/w01/patch", {{"kind", "add"}, {"vertices", to_json_vertices(add)}})->status,
              200);
    const auto patched = json_of(
        post_json(client, "/images/w01/patch", {{"kind", "delete"}, {"vertices", to_json_vertices(del)}}));
    EXPECT_EQ(patched["edits"], 2);
    ASSERT_EQ(client.Get(patched["overlay"].get<std::string>())->status, 200);
    ASSERT_EQ(post_json(client, "/images/w01/commit", nlohmann::json::object())->status, 200);
    const auto reloaded = json_of(client.Get(api("/images/w01/annotation")));
    EXPECT_EQ(reloaded["has_mask"], true);
    via_http = record_from_json(reloaded);
  }

  AnnotationRecord via_lib;
  {
    AnnotationStore store(lib_dir.path() / "manifest.tsv");
    const WordImage img = load_image(store.manifest().entry("w01").image_path, "w01");
    store.select("w01", 4, build_bank(img, Polarity::kNormal, std::uint64_t{0}));
    store.patch("w01", EditKind::kAdd, add);
    store.patch("w01", EditKind::kDelete, del);
    via_lib = store.commit_draft("w01");
  }

  via_http.updated_at.clear();
  via_lib.updated_at.clear();
  EXPECT_EQ(via_http, via_lib);
  EXPECT_EQ(load_mask_with_metadata(http_dir.path() / "annotations" / "w01.png").mask,
            load_mask_with_metadata(lib_dir.path() / "annotations" / "w01.png").mask);
  // The persisted record file (minus timestamp) matches too.
  auto on_disk = [](const fs::path& p) {
    const Bytes raw = read_file(p);
    auto j = nlohmann::json::parse(raw.begin(), raw.end());
    j.erase("updated_at");
    return j;
  };
  EXPECT_EQ(on_disk(http_dir.path() / "annotations" / "w01.ann.json"),
            on_disk(lib_dir.path() / "annotations" / "w01.ann.json"));
}

TEST(Service, OverlayAndMaskReflectDraft) {
  testing::TempDir dir;
  testing::write_word_dataset(dir.path(), 1);
  testing::RunningService running(config_for(dir.path()));
  auto client = running.client();
  EXPECT_EQ(client.Get(api("/images/w00/mask"))->status, 404);
  const auto plain = client.Get(api("/images/w00/overlay"));
  ASSERT_EQ(plain->status, 200);
  ASSERT_EQ(post_json(client, "/images/w00/selection", {{"candidate", 1}})->status, 200);
  const auto tinted = client.Get(api("/images/w00/overlay"));
  ASSERT_EQ(tinted->status, 200);
  EXPECT_NE(tinted->body, plain->body);
  const WordImage img = decode_image(Bytes(tinted->body.begin(), tinted->body.end()), "o");
  const WordImage original = load_image(dir.path() / "images" / "w00.png", "w00");
  const SegMask mask = label_components(build_bank(original, Polarity::kNormal, std::uint64_t{0}).at(1).mask);
  EXPECT_EQ(img.pixels, overlay(original, mask).pixels);
}

TEST(Service, ReadOnlyRefusesMutations) {
  testing::TempDir dir;
  testing::write_word_dataset(dir.path(), 1);
  testing::RunningService running(config_for(dir.path(), true));
  auto client = running.client();
  EXPECT_EQ(client.Get(api("/images"))->status, 200);
  EXPECT_EQ(post_json(client, "/images/w00/selection", {{"candidate", 1}})->status, 403);
  EXPECT_EQ(post_json(client, "/images/w00/skip", nlohmann::json::object())->status, 403);
  EXPECT_EQ(post_json(client, "/images/w00/commit", nlohmann::json::object())->status, 403);
}

TEST(Service, SecondWriterAndRemoteBindRejected) {
  testing::TempDir dir;
  testing::write_word_dataset(dir.path(), 1);
  testing::RunningService running(config_for(dir.path()));
  EXPECT_EQ(code_of([&] { AnnotationService second(config_for(dir.path())); }), ErrorCode::kLockHeld);
  EXPECT_NO_THROW(AnnotationService reader(config_for(dir.path(), true)));

  ServiceConfig remote = config_for(dir.path(), true);
  remote.host = "0.0.0.0";
  EXPECT_EQ(code_of([&] { AnnotationService s(remote); }), ErrorCode::kInvalidArgument);
  remote.allow_remote = true;
  EXPECT_NO_THROW(AnnotationService s(remote));

  EXPECT_EQ(code_of([&] { AnnotationService s(config_for(dir.path() / "missing", true)); }),
            ErrorCode::kInvalidArgument);
}

TEST(Service, PortInUseReported) {
  testing::TempDir dir;
  testing::write_word_dataset(dir.path(), 1);
  testing::RunningService running(config_for(dir.path()));
  ServiceConfig clash = config_for(dir.path(), true);
  clash.port = running.port();
  AnnotationService second(clash);
  EXPECT_EQ(code_of([&] { second.bind(); }), ErrorCode::kAddressInUse);
}

}  // namespace
}  // namespace maskbench
