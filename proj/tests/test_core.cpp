#include <set>

#include "doctest.h"
#include "flowck/core.hpp"
#include "test_util.hpp"

using namespace flowck;

namespace {

StructTable nested_structs() {
  StructTable t;
  t.add(StructDef{"G", {{"h", Type::boolean()}}, {}});
  t.add(StructDef{"X", {{"f", Type::u32()}, {"g", Type::structure("G")}}, {}});
  return t;
}

std::set<std::string> leaf_strs(const std::vector<Leaf>& ls) {
  std::set<std::string> out;
  for (const auto& l : ls) out.insert(l.place.str());
  return out;
}

}  // namespace

TEST_CASE("leaves of a nested struct are its scalar fields") {
  auto structs = nested_structs();
  auto ls = leaves(Place("x"), Type::structure("X"), structs);
  CHECK(leaf_strs(ls) == std::set<std::string>{"x.f", "x.g.h"});
  for (const auto& l : ls) {
    if (l.place.str() == "x.g.h") {
      CHECK(l.context == Path{"g", "h"});
      CHECK(l.type == Type::boolean());
    }
  }
}

TEST_CASE("leaves of base types and tuples") {
  StructTable none;
  CHECK(leaf_strs(leaves(Place("x"), Type::u32(), none)) == std::set<std::string>{"x"});
  CHECK(leaf_strs(leaves(Place("x"), Type::tuple({Type::u32(), Type::boolean()}), none)) ==
        std::set<std::string>{"x.0", "x.1"});
  CHECK(leaf_strs(leaves(Place("x"), Type::unit(), none)) == std::set<std::string>{"x"});
}

TEST_CASE("sums, references and closures are single leaves") {
  auto structs = nested_structs();
  Type s = Type::sum(Type::structure("X"), Type::u32());
  CHECK(leaf_strs(leaves(Place("x"), s, structs)) == std::set<std::string>{"x"});
  Type r = Type::ref(Ownership::Uniq, Type::structure("X"));
  CHECK(leaf_strs(leaves(Place("r"), r, structs)) == std::set<std::string>{"r"});
  CHECK(leaves(Place("c"), Type::closure(0, {Type::u32()}), structs).size() == 1);
}

TEST_CASE("recursive struct occurrences collapse to a leaf") {
  StructTable t;
  t.add(StructDef{"List", {{"head", Type::u32()}, {"tail", Type::structure("List")}}, {}});
  auto ls = leaves(Place("l"), Type::structure("List"), t);
  CHECK(leaf_strs(ls) == std::set<std::string>{"l.head", "l.tail"});
}

TEST_CASE("leaves extend the decomposed place") {
  auto structs = nested_structs();
  Place base("y", {"1"});
  auto ls = leaves(base, Type::structure("X"), structs);
  for (const auto& l : ls) {
    CHECK(base.is_prefix_of(l.place));
    CHECK(l.place == base.extended(l.context));
  }
}

TEST_CASE("specificity") {
  CHECK(specificity(AccessExpr::wildcard()) == 0);
  CHECK(specificity(AccessExpr::of_place(Place("b"))) == 1);
  CHECK(specificity(AccessExpr::of_place(Place("b", {"f"}))) == 2);
  CHECK(specificity(AccessExpr::of_fn("write")) == 1);
  CHECK(specificity(AccessExpr::wildcard()) < specificity(AccessExpr::of_place(Place("b"))));
}

TEST_CASE("place prefix and overlap") {
  Place a("x", {"f"});
  Place b("x", {"f", "g"});
  Place c("x", {"h"});
  CHECK(a.is_prefix_of(b));
  CHECK_FALSE(b.is_prefix_of(a));
  CHECK(a.overlaps(b));
  CHECK(b.overlaps(a));
  CHECK_FALSE(a.overlaps(c));
  CHECK(is_prefix(Path{}, Path{"a"}));
  CHECK(Place("x").is_prefix_of(Place("x")));
}

TEST_CASE("place and access expression rendering") {
  CHECK(Place("x", {"0", "f"}).str() == "x.0.f");
  PlaceExpr pe{"r", {{PlaceOp::Kind::Deref, ""}, {PlaceOp::Kind::Project, "f"}}};
  CHECK(pe.has_deref());
  CHECK(pe.projection_count() == 1);
  CHECK(AccessExpr::wildcard().str() == "*");
  CHECK(AccessExpr::of_fn("send").str() == "fn send");
  FlowRule r{AccessExpr::of_place(Place("s")), AccessExpr::wildcard(), false, {}};
  CHECK(r.str() == "s ->! *");
  r.permit = true;
  CHECK(r.str() == "s -> *");
}

TEST_CASE("display names strip the shadowing suffix") {
  CHECK(display_name("x") == "x");
  CHECK(display_name("x#2") == "x");
}

TEST_CASE("copyable and project_type") {
  auto structs = nested_structs();
  CHECK(copyable(Type::u32(), structs));
  CHECK(copyable(Type::tuple({Type::u32(), Type::boolean()}), structs));
  CHECK(copyable(Type::ref(Ownership::Shrd, Type::structure("X")), structs));
  CHECK_FALSE(copyable(Type::ref(Ownership::Uniq, Type::u32()), structs));
  CHECK_FALSE(copyable(Type::structure("X"), structs));
  auto g = project_type(Type::structure("X"), "g", structs);
  REQUIRE(g);
  CHECK(*g == Type::structure("G"));
  CHECK_FALSE(project_type(Type::structure("X"), "zz", structs));
  auto one = project_type(Type::tuple({Type::u32(), Type::boolean()}), "1", structs);
  REQUIRE(one);
  CHECK(*one == Type::boolean());
}
