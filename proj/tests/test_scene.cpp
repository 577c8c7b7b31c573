#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "sgae/geometry.hpp"
#include "sgae/relations.hpp"
#include "sgae/rng.hpp"
#include "sgae/scene.hpp"
#include "sgae/scene_gen.hpp"
#include "sgae/scene_io.hpp"

using namespace sgae;
using Catch::Approx;

namespace {

OrientedBox box_at(double cx, double cy, double cz, double w, double l,
                   double h, double yaw = 0.0) {
  OrientedBox b;
  b.center = {cx, cy, cz};
  b.extents = {w, l, h};
  b.yaw = yaw;
  return b;
}

OrientedBox random_box(Rng& rng) {
  return box_at(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                rng.uniform(0.0, 2.0), rng.uniform(0.1, 1.5),
                rng.uniform(0.1, 1.5), rng.uniform(0.1, 1.5),
                rng.uniform(0.0, 6.28));
}

}  // namespace

TEST_CASE("oriented box corners and containment") {
  auto b = box_at(1.0, 2.0, 3.0, 2.0, 4.0, 6.0);
  const Aabb aabb = b.world_aabb();
  REQUIRE(aabb.lo.x == Approx(0.0));
  REQUIRE(aabb.hi.y == Approx(4.0));
  REQUIRE(aabb.hi.z == Approx(6.0));
  REQUIRE(b.contains({1.0, 2.0, 3.0}));
  REQUIRE(b.contains({1.99, 3.99, 5.99}));
  REQUIRE_FALSE(b.contains({2.1, 2.0, 3.0}));

  SECTION("yaw rotates the footprint") {
    auto r = box_at(0.0, 0.0, 0.0, 2.0, 1.0, 1.0, std::numbers::pi / 2.0);
    REQUIRE(r.contains({0.0, 0.9, 0.0}));
    REQUIRE_FALSE(r.contains({0.9, 0.0, 0.0}));
  }

  SECTION("parameter vector round-trips") {
    auto p = b.params();
    auto c = OrientedBox::from_params(p);
    REQUIRE(c.center.x == b.center.x);
    REQUIRE(c.extents.z == b.extents.z);
    REQUIRE(c.yaw == b.yaw);
  }
}

TEST_CASE("union box contains all corners of both inputs") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_box(rng);
    auto b = random_box(rng);
    auto u = union_box(a, b);
    REQUIRE(u.yaw == 0.0);
    for (const auto& c : a.corners()) REQUIRE(u.contains(c, 1e-9));
    for (const auto& c : b.corners()) REQUIRE(u.contains(c, 1e-9));
  }
}

TEST_CASE("centering subtracts the centroid") {
  Rng rng(4);
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i)
    pts.push_back({rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                   rng.uniform(-2.0, 2.0)});
  auto copy = pts;
  const Vec3 c = normalize_centers(copy);
  Vec3 after{0, 0, 0};
  for (const auto& p : copy) after = after + p;
  REQUIRE(std::abs(after.x) / copy.size() < 1e-9);
  REQUIRE(std::abs(after.y) / copy.size() < 1e-9);
  REQUIRE(std::abs(after.z) / copy.size() < 1e-9);
  REQUIRE(copy[0].x == Approx(pts[0].x - c.x));
  std::vector<Vec3> empty;
  REQUIRE_THROWS_AS(normalize_centers(empty), ContractError);
}

TEST_CASE("farthest point sampling") {
  SECTION("two samples realize the diameter on random sets") {
    Rng rng(33);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<Vec3> pts;
      const int n = 5 + static_cast<int>(rng.below(40));
      for (int i = 0; i < n; ++i)
        pts.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                       rng.uniform(-1.0, 1.0)});
      double diameter = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
          diameter = std::max(diameter, (pts[i] - pts[j]).norm_sq());
      auto picked = farthest_point_sample(pts, 2);
      REQUIRE(picked.size() == 2);
      REQUIRE((pts[picked[0]] - pts[picked[1]]).norm_sq() ==
              Approx(diameter));
    }
  }

  SECTION("square corners with a center point pick opposite corners") {
    std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                          {0.5, 0.5, 0}};
    auto picked = farthest_point_sample(pts, 2);
    REQUIRE((pts[picked[0]] - pts[picked[1]]).norm() == Approx(std::sqrt(2.0)));
  }

  SECTION("requesting at least the set size returns everything in order") {
    std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    auto all = farthest_point_sample(pts, 5);
    REQUIRE(all == std::vector<std::size_t>{0, 1, 2});
  }

  SECTION("deterministic with ties broken toward lower indices") {
    std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 0, 0}, {1, 0, 0}};
    auto a = farthest_point_sample(pts, 3);
    auto b = farthest_point_sample(pts, 3);
    REQUIRE(a == b);
    REQUIRE(a[0] == 0);
    REQUIRE(a[1] == 1);
  }

  SECTION("coverage radius shrinks as samples grow") {
    Rng rng(8);
    std::vector<Vec3> pts;
    for (int i = 0; i < 200; ++i)
      pts.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0});
    auto cover_radius = [&](const std::vector<std::size_t>& sel) {
      double worst = 0.0;
      for (const auto& p : pts) {
        double best = 1e18;
        for (auto s : sel) best = std::min(best, (p - pts[s]).norm_sq());
        worst = std::max(worst, best);
      }
      return worst;
    };
    auto s8 = farthest_point_sample(pts, 8);
    auto s32 = farthest_point_sample(pts, 32);
    REQUIRE(cover_radius(s32) < cover_radius(s8));
  }
}

TEST_CASE("relation rules on hand-built boxes") {
  auto a = box_at(0.0, 0.0, 0.5, 1.0, 1.0, 1.0);

  SECTION("separated along x gives left, reversed gives right") {
    auto b = box_at(1.2, 0.0, 0.5, 1.0, 1.0, 1.0);
    auto ab = relation_rules(a, b, false);
    REQUIRE(std::count(ab.begin(), ab.end(), kLeft) == 1);
    REQUIRE(std::count(ab.begin(), ab.end(), kCloseBy) == 1);
    auto ba = relation_rules(b, a, false);
    REQUIRE(std::count(ba.begin(), ba.end(), kRight) == 1);
  }

  SECTION("distant boxes are not close_by") {
    auto b = box_at(3.0, 0.0, 0.5, 1.0, 1.0, 1.0);
    auto ab = relation_rules(a, b, false);
    REQUIRE(std::count(ab.begin(), ab.end(), kCloseBy) == 0);
  }

  SECTION("volume ratio drives bigger and smaller") {
    auto big = box_at(0.0, 0.0, 0.5, 1.1, 1.1, 1.1);
    auto ab = relation_rules(big, a, false);
    REQUIRE(std::count(ab.begin(), ab.end(), kBigger) == 1);
    auto near_same = box_at(0.0, 0.0, 0.5, 1.05, 1.0, 1.0);
    auto cd = relation_rules(near_same, a, false);
    REQUIRE(std::count(cd.begin(), cd.end(), kBigger) == 0);
  }

  SECTION("same_as needs family match and similar extents") {
    auto b = box_at(2.0, 0.0, 0.5, 1.05, 0.95, 1.0);
    auto with_family = relation_rules(a, b, true);
    REQUIRE(std::count(with_family.begin(), with_family.end(), kSameAs) == 1);
    auto without = relation_rules(a, b, false);
    REQUIRE(std::count(without.begin(), without.end(), kSameAs) == 0);
    auto stretched = box_at(2.0, 0.0, 0.5, 1.5, 1.0, 1.0);
    auto off = relation_rules(a, stretched, true);
    REQUIRE(std::count(off.begin(), off.end(), kSameAs) == 0);
  }

  SECTION("book on a table stands on it") {
    auto table = box_at(0.0, 0.0, 0.375, 1.2, 0.8, 0.75);
    auto book = box_at(0.1, 0.1, 0.75 + 0.02, 0.2, 0.25, 0.04);
    auto rel = relation_rules(book, table, false);
    REQUIRE(std::count(rel.begin(), rel.end(), kStandingOn) == 1);
    auto rev = relation_rules(table, book, false);
    REQUIRE(std::count(rev.begin(), rev.end(), kStandingOn) == 0);

    auto floating = box_at(0.1, 0.1, 1.2, 0.2, 0.25, 0.04);
    auto none = relation_rules(floating, table, false);
    REQUIRE(std::count(none.begin(), none.end(), kStandingOn) == 0);

    auto off_edge = box_at(2.0, 0.1, 0.75 + 0.02, 0.2, 0.25, 0.04);
    auto miss = relation_rules(off_edge, table, false);
    REQUIRE(std::count(miss.begin(), miss.end(), kStandingOn) == 0);
  }
}

TEST_CASE("relation rules are antisymmetric on random pairs") {
  Rng rng(99);
  auto has = [](const std::vector<int>& v, int p) {
    return std::find(v.begin(), v.end(), p) != v.end();
  };
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_box(rng);
    auto b = random_box(rng);
    const bool fam = rng.uniform() < 0.5;
    auto ab = relation_rules(a, b, fam);
    auto ba = relation_rules(b, a, fam);
    REQUIRE(has(ab, kLeft) == has(ba, kRight));
    REQUIRE(has(ab, kRight) == has(ba, kLeft));
    REQUIRE(has(ab, kFront) == has(ba, kBehind));
    REQUIRE(has(ab, kBehind) == has(ba, kFront));
    REQUIRE(has(ab, kHigher) == has(ba, kLower));
    REQUIRE(has(ab, kLower) == has(ba, kHigher));
    REQUIRE(has(ab, kBigger) == has(ba, kSmaller));
    REQUIRE(has(ab, kSmaller) == has(ba, kBigger));
    REQUIRE(has(ab, kSameAs) == has(ba, kSameAs));
    REQUIRE(has(ab, kCloseBy) == has(ba, kCloseBy));
    REQUIRE_FALSE((has(ab, kStandingOn) && has(ba, kStandingOn)));
    REQUIRE(std::is_sorted(ab.begin(), ab.end()));
  }
}

TEST_CASE("instance and pair extraction") {
  GeneratorConfig cfg;
  cfg.points_per_object = 64;
  Rng rng(7);
  Scene scene = generate_scene(cfg, rng);

  SECTION("instance points are exactly that instance's points") {
    for (const auto& obj : scene.objects) {
      auto pts = extract_instance_points(scene, obj.instance_id);
      REQUIRE(pts.size() == 64);
      for (const auto& p : pts) REQUIRE(obj.box.contains(p, 1e-9));
    }
    REQUIRE_THROWS_AS(extract_instance_points(scene, 999), DataError);
  }

  SECTION("pair extraction masks members and keeps context inside the box") {
    const int ia = scene.objects[0].instance_id;
    const int ib = scene.objects[1].instance_id;
    auto pair = extract_pair_points(scene, ia, ib);
    REQUIRE(pair.points.size() == pair.mask.size());
    REQUIRE(std::count(pair.mask.begin(), pair.mask.end(), 1) == 64);
    REQUIRE(std::count(pair.mask.begin(), pair.mask.end(), 2) == 64);
    const Aabb region =
        union_box(scene.objects[0].box, scene.objects[1].box).world_aabb();
    for (std::size_t i = 0; i < pair.points.size(); ++i)
      if (pair.mask[i] == 0) REQUIRE(region.contains(pair.points[i], 1e-9));
    REQUIRE_THROWS_AS(extract_pair_points(scene, ia, ia), ContractError);
    REQUIRE_THROWS_AS(extract_pair_points(scene, ia, 999), DataError);
  }
}

TEST_CASE("scene file round-trip") {
  GeneratorConfig cfg;
  cfg.points_per_object = 48;
  Rng rng(11);
  Scene scene = generate_scene(cfg, rng);

  std::ostringstream first;
  write_scene(first, scene);
  std::istringstream in(first.str());
  Scene back = read_scene(in);

  REQUIRE(back.objects.size() == scene.objects.size());
  REQUIRE(back.points.size() == scene.points.size());
  REQUIRE(back.graph.edges.size() == scene.graph.edges.size());

  std::ostringstream second;
  write_scene(second, back);
  REQUIRE(first.str() == second.str());

  SECTION("loaded values are bit-identical") {
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
      REQUIRE(back.points[i].x == scene.points[i].x);
      REQUIRE(back.points[i].y == scene.points[i].y);
      REQUIRE(back.points[i].z == scene.points[i].z);
    }
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      REQUIRE(back.objects[i].box.yaw == scene.objects[i].box.yaw);
      REQUIRE(back.objects[i].box.center.x == scene.objects[i].box.center.x);
    }
  }
}

TEST_CASE("scene reader rejects malformed input") {
  GeneratorConfig cfg;
  cfg.points_per_object = 16;
  cfg.min_objects = 3;
  cfg.max_objects = 4;
  Rng rng(13);
  Scene scene = generate_scene(cfg, rng);
  std::ostringstream os;
  write_scene(os, scene);
  const std::string good = os.str();

  auto expect_fail = [](const std::string& text) {
    std::istringstream in(text);
    REQUIRE_THROWS_AS(read_scene(in), DataError);
  };

  SECTION("truncation") {
    expect_fail(good.substr(0, good.size() - 5));
    expect_fail(good.substr(0, good.size() / 2));
  }
  SECTION("wrong magic or version") {
    expect_fail("SGSCENE v2\n");
    std::string bad = good;
    bad.replace(0, 7, "NOTASCN");
    expect_fail(bad);
  }
  SECTION("unknown point instance") {
    std::string bad = good;
    auto pos = bad.find("point ");
    auto eol = bad.find('\n', pos);
    auto line_start = bad.rfind(' ', eol);
    bad.replace(line_start + 1, eol - line_start - 1, "404");
    expect_fail(bad);
  }
  SECTION("garbage where a number belongs") {
    std::string bad = good;
    auto pos = bad.find("vocab 12");
    bad.replace(pos, 8, "vocab xx");
    expect_fail(bad);
  }
}

TEST_CASE("generator output") {
  GeneratorConfig cfg;
  cfg.points_per_object = 32;

  SECTION("same seed gives byte-identical scenes") {
    Rng a(42), b(42);
    std::ostringstream sa, sb;
    write_scene(sa, generate_scene(cfg, a));
    write_scene(sb, generate_scene(cfg, b));
    REQUIRE(sa.str() == sb.str());
  }

  SECTION("different seeds differ") {
    Rng a(42), b(43);
    std::ostringstream sa, sb;
    write_scene(sa, generate_scene(cfg, a));
    write_scene(sb, generate_scene(cfg, b));
    REQUIRE(sa.str() != sb.str());
  }

  SECTION("corpus-level structural invariants") {
    Rng rng(2026);
    std::map<int, int> class_counts;
    bool saw_standing = false;
    int scenes_with_edges = 0;
    for (int s = 0; s < 40; ++s) {
      Scene scene = generate_scene(cfg, rng);
      REQUIRE(scene.objects.size() >= 4);
      REQUIRE(scene.objects.size() <= 9);
      REQUIRE(scene.num_classes == 12);
      REQUIRE(scene.num_predicates == 11);

      // Every non-context point inside its instance's box.
      std::map<int, const SceneObject*> by_id;
      for (const auto& o : scene.objects) by_id[o.instance_id] = &o;
      int floor_count = 0;
      for (std::size_t i = 0; i < scene.points.size(); ++i) {
        const int inst = scene.point_instance[i];
        if (inst == kContextInstance) {
          ++floor_count;
          continue;
        }
        REQUIRE(by_id.at(inst)->box.contains(scene.points[i], 1e-9));
      }
      REQUIRE(floor_count == cfg.floor_points);

      // Stored labels replay exactly from stored geometry.
      auto replay = derive_graph(scene, cfg.thresholds);
      REQUIRE(replay.edges.size() == scene.graph.edges.size());
      for (std::size_t e = 0; e < replay.edges.size(); ++e) {
        REQUIRE(replay.edges[e].src == scene.graph.edges[e].src);
        REQUIRE(replay.edges[e].dst == scene.graph.edges[e].dst);
        REQUIRE(replay.edges[e].predicates ==
                scene.graph.edges[e].predicates);
      }

      if (!scene.graph.edges.empty()) ++scenes_with_edges;
      for (const auto& o : scene.objects) ++class_counts[o.class_id];
      for (const auto& e : scene.graph.edges)
        for (int p : e.predicates)
          if (p == kStandingOn) saw_standing = true;
    }
    REQUIRE(scenes_with_edges == 40);
    REQUIRE(saw_standing);
    // Long-tail check: the heaviest class strictly outnumbers the lightest.
    REQUIRE(class_counts[0] > class_counts[11]);
  }

  SECTION("impossible placement budgets raise a generation error") {
    GeneratorConfig tiny = cfg;
    tiny.room_extent = 0.5;
    tiny.min_objects = 9;
    tiny.max_objects = 9;
    tiny.max_retries = 8;
    Rng rng(3);
    REQUIRE_THROWS_AS(generate_scene(tiny, rng), DataError);
  }
}

TEST_CASE("scene validation catches inconsistent structures") {
  GeneratorConfig cfg;
  cfg.points_per_object = 16;
  Rng rng(17);
  Scene scene = generate_scene(cfg, rng);

  SECTION("duplicate instance ids") {
    Scene bad = scene;
    bad.objects[1].instance_id = bad.objects[0].instance_id;
    REQUIRE_THROWS_AS(validate_scene(bad), DataError);
  }
  SECTION("class id out of vocabulary") {
    Scene bad = scene;
    bad.objects[0].class_id = 99;
    REQUIRE_THROWS_AS(validate_scene(bad), DataError);
  }
  SECTION("edge endpoint out of range") {
    Scene bad = scene;
    bad.graph.edges[0].src = 50;
    REQUIRE_THROWS_AS(validate_scene(bad), DataError);
  }
  SECTION("unlabeled scene with class ids") {
    Scene bad = scene;
    bad.has_labels = false;
    bad.graph.edges.clear();
    REQUIRE_THROWS_AS(validate_scene(bad), DataError);
  }
  SECTION("object without points") {
    Scene bad = scene;
    bad.objects.push_back(bad.objects[0]);
    bad.objects.back().instance_id = 77;
    REQUIRE_THROWS_AS(validate_scene(bad), DataError);
  }
}
