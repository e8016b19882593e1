#include "type_gen.hpp"

#include <algorithm>
#include <functional>

namespace gen {

using namespace flowck;

namespace {

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Type base(std::mt19937_64& rng) {
  switch (uniform(rng, 0, 2)) {
    case 0:
      return Type::unit();
    case 1:
      return Type::u32();
    default:
      return Type::boolean();
  }
}

}  // namespace

StructTable random_structs(std::mt19937_64& rng) {
  StructTable table;
  const std::vector<std::string> names{"A", "B", "C"};
  for (const auto& n : names) {
    StructDef def{n, {}, {}};
    int fields = uniform(rng, 1, 3);
    for (int i = 0; i < fields; ++i) {
      Type t;
      int roll = uniform(rng, 0, 5);
      if (roll == 0) {
        t = Type::structure(names[static_cast<size_t>(uniform(rng, 0, 2))]);
      } else if (roll == 1) {
        t = Type::tuple({base(rng), base(rng)});
      } else {
        t = base(rng);
      }
      def.fields.push_back({"f" + std::to_string(i), t});
    }
    table.add(std::move(def));
  }
  return table;
}

Type random_type(std::mt19937_64& rng, const StructTable& structs, int depth) {
  if (depth <= 1) return base(rng);
  switch (uniform(rng, 0, 6)) {
    case 0:
    case 1: {
      std::vector<Type> elems;
      int n = uniform(rng, 1, 3);
      for (int i = 0; i < n; ++i) elems.push_back(random_type(rng, structs, depth - 1));
      return Type::tuple(std::move(elems));
    }
    case 2: {
      const auto& all = structs.all();
      auto it = all.begin();
      std::advance(it, uniform(rng, 0, static_cast<int>(all.size()) - 1));
      return Type::structure(it->first);
    }
    case 3:
      return Type::sum(random_type(rng, structs, depth - 1), random_type(rng, structs, depth - 1));
    case 4:
      return Type::ref(uniform(rng, 0, 1) ? Ownership::Uniq : Ownership::Shrd,
                       random_type(rng, structs, depth - 1));
    default:
      return base(rng);
  }
}

PlaceSet random_places(std::mt19937_64& rng, int max_size) {
  static const std::vector<Place> pool{Place("a"), Place("b", {"0"}), Place("b", {"1"}),
                                       Place("c", {"f", "g"}), Place("d"), Place("e", {"x"})};
  PlaceSet out;
  int n = uniform(rng, 0, max_size);
  for (int i = 0; i < n; ++i) out.insert(pool[static_cast<size_t>(uniform(rng, 0, 5))]);
  return out;
}

DeltaTree random_delta(std::mt19937_64& rng, const Type& t, const StructTable& structs) {
  DeltaTree d = DeltaTree::empty(t, structs);
  for (auto& [ctx, deps] : d.leaves()) deps = random_places(rng);
  return d;
}

std::vector<Path> scalar_paths(const Type& t, const StructTable& structs) {
  std::vector<Path> out;
  std::vector<std::string> open;
  Path cur;
  std::function<void(const Type&)> walk = [&](const Type& ty) {
    if (ty.kind == TypeKind::Tuple && !ty.elems.empty()) {
      for (size_t i = 0; i < ty.elems.size(); ++i) {
        cur.push_back(std::to_string(i));
        walk(ty.elems[i]);
        cur.pop_back();
      }
      return;
    }
    if (ty.kind == TypeKind::Struct && std::find(open.begin(), open.end(), ty.name) == open.end()) {
      const StructDef* def = structs.find(ty.name);
      if (def && !def->fields.empty()) {
        open.push_back(ty.name);
        for (const auto& f : def->fields) {
          cur.push_back(f.name);
          walk(f.type);
          cur.pop_back();
        }
        open.pop_back();
        return;
      }
    }
    out.push_back(cur);
  };
  walk(t);
  return out;
}

}  // namespace gen
