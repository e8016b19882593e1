#include "closure_oracle.hpp"

#include <map>
#include <vector>

#include "policy_oracle.hpp"

namespace oracle {

using namespace flowck;

namespace {

struct Node {
  Place leaf;
  std::vector<int> preds;
  int psi = -1;  // rule snapshot of the defining event; -1 for joins and inputs
};

struct State {
  std::map<Place, int> current;
  std::map<std::string, Type> types;
  std::map<Place, std::set<Place>> targets;  // reference leaf -> referents
  std::vector<int> xi;
};

struct Val {
  Type type;
  std::map<Path, std::vector<int>> srcs;
  std::set<Place> targets;  // for reference values
};

class Walker {
 public:
  explicit Walker(const Program& prog) : prog_(prog) {}

  ClosureResult run(const FuncDef& f) {
    scopes_.emplace_back();
    for (const auto& p : f.params) st_.types[p.name] = p.type;
    for (const auto& r : f.contract) add_rule(r);
    if (f.body) eval(*f.body);
    return collect();
  }

 private:
  const Program& prog_;
  std::vector<Node> nodes_;
  std::vector<std::vector<ScopedRule>> psis_;
  std::vector<std::vector<FlowRule>> scopes_;
  State st_;

  void add_rule(const FlowRule& r) { scopes_.back().push_back(r); }

  int snapshot() {
    std::vector<ScopedRule> flat;
    for (size_t i = 0; i < scopes_.size(); ++i)
      for (const auto& r : scopes_[i]) flat.push_back({i, r});
    psis_.push_back(std::move(flat));
    return static_cast<int>(psis_.size()) - 1;
  }

  int node(const Place& leaf) {
    auto it = st_.current.find(leaf);
    if (it != st_.current.end()) return it->second;
    nodes_.push_back(Node{leaf, {}, -1});
    int id = static_cast<int>(nodes_.size()) - 1;
    st_.current[leaf] = id;
    return id;
  }

  Type type_of(const Place& p) const {
    auto it = st_.types.find(p.root);
    if (it == st_.types.end()) throw Unsupported("unbound " + p.root);
    Type t = it->second;
    for (const auto& s : p.path) {
      auto n = project_type(t, s, prog_.structs);
      if (!n) throw Unsupported("bad projection");
      t = *n;
    }
    return t;
  }

  Val read(const Place& p, const Type& t) {
    Val v;
    v.type = t;
    for (const auto& l : leaves(p, t, prog_.structs)) {
      v.srcs[l.context].push_back(node(l.place));
      if (l.type.is_ref()) {
        auto it = st_.targets.find(l.place);
        if (it != st_.targets.end()) v.targets.insert(it->second.begin(), it->second.end());
      }
    }
    return v;
  }

  Val eval(const Expr& e) {
    if (const auto* c = e.as<ConstExpr>()) {
      Val v;
      v.type = c->kind == ConstExpr::Kind::Unit  ? Type::unit()
               : c->kind == ConstExpr::Kind::Int ? Type::u32()
                                                  : Type::boolean();
      v.srcs[{}];
      return v;
    }
    if (const auto* u = e.as<UseExpr>()) {
      const auto& ops = u->place.ops;
      if (!u->place.has_deref()) {
        Place p = u->place.as_place();
        return read(p, type_of(p));
      }
      if (ops.size() != 1) throw Unsupported("nested deref");
      Place r(u->place.root);
      Type rt = type_of(r);
      Val v;
      v.type = rt.referent();
      int ptr = node(r);
      for (const auto& target : st_.targets[r]) {
        Val part = read(target, v.type);
        for (auto& [ctx, s] : part.srcs) {
          auto& dst = v.srcs[ctx];
          dst.insert(dst.end(), s.begin(), s.end());
        }
      }
      for (const auto& l : leaves(Place(""), v.type, prog_.structs)) v.srcs[l.context].push_back(ptr);
      return v;
    }
    if (const auto* t = e.as<TupleExpr>()) {
      Val v;
      std::vector<Type> elems;
      for (size_t i = 0; i < t->elems.size(); ++i) {
        Val c = eval(*t->elems[i]);
        elems.push_back(c.type);
        for (auto& [ctx, s] : c.srcs) {
          Path p{std::to_string(i)};
          p.insert(p.end(), ctx.begin(), ctx.end());
          v.srcs[p] = s;
        }
      }
      v.type = Type::tuple(elems);
      return v;
    }
    if (const auto* s = e.as<StructExpr>()) {
      Val v;
      v.type = Type::structure(s->name);
      for (const auto& [name, fe] : s->fields) {
        Val c = eval(*fe);
        for (auto& [ctx, srcs] : c.srcs) {
          Path p{name};
          p.insert(p.end(), ctx.begin(), ctx.end());
          v.srcs[p] = srcs;
        }
      }
      return v;
    }
    if (const auto* b = e.as<BorrowExpr>()) {
      if (b->place.has_deref()) throw Unsupported("borrow through deref");
      Place p = b->place.as_place();
      Val v;
      v.type = Type::ref(b->own, type_of(p));
      v.srcs[{}];
      v.targets.insert(p);
      return v;
    }
    if (const auto* a = e.as<AllowExpr>()) {
      Val v = eval(*a->inner);
      for (auto& [ctx, s] : v.srcs) s.clear();
      return v;
    }
    if (const auto* b = e.as<BlockExpr>()) {
      scopes_.emplace_back();
      Val v = eval(*b->body);
      scopes_.pop_back();
      return v;
    }
    if (const auto* s = e.as<SeqExpr>()) {
      eval(*s->first);
      return eval(*s->second);
    }
    if (const auto* f = e.as<FlowDeclExpr>()) {
      add_rule(f->rule);
      return unit();
    }
    if (const auto* l = e.as<LetExpr>()) {
      Val init = eval(*l->init);
      Type t = l->annot ? *l->annot : init.type;
      scopes_.emplace_back();
      for (const auto& r : l->with_rules) add_rule(r);
      st_.types[l->name] = t;
      define(Place(l->name), t, init);
      Val body = eval(*l->body);
      scopes_.pop_back();
      return body;
    }
    if (const auto* a = e.as<AssignExpr>()) {
      Val v = eval(*a->value);
      if (a->target.has_deref()) throw Unsupported("assignment through deref");
      Place p = a->target.as_place();
      define(p, type_of(p), v);
      return unit();
    }
    if (const auto* i = e.as<IfExpr>()) {
      Val g = eval(*i->guard);
      std::vector<int> outer_xi = st_.xi;
      for (const auto& [ctx, s] : g.srcs) st_.xi.insert(st_.xi.end(), s.begin(), s.end());
      std::vector<int> arm_xi = st_.xi;
      State before = st_;
      Val a = eval(*i->then_branch);
      State then_state = st_;
      st_ = before;
      Val b = eval(*i->else_branch);
      join(then_state);
      st_.xi = outer_xi;
      Val v;
      v.type = a.type;
      for (auto& [ctx, s] : a.srcs) {
        auto& dst = v.srcs[ctx];
        dst = s;
        const auto& other = b.srcs[ctx];
        dst.insert(dst.end(), other.begin(), other.end());
        dst.insert(dst.end(), arm_xi.begin(), arm_xi.end());
      }
      v.targets = a.targets;
      v.targets.insert(b.targets.begin(), b.targets.end());
      return v;
    }
    throw Unsupported("expression form outside the generated fragment");
  }

  static Val unit() {
    Val v;
    v.type = Type::unit();
    v.srcs[{}];
    return v;
  }

  void define(const Place& p, const Type& t, const Val& v) {
    int psi = snapshot();
    for (const auto& l : leaves(p, t, prog_.structs)) {
      Node n{l.place, {}, psi};
      auto it = v.srcs.find(l.context);
      if (it != v.srcs.end()) n.preds = it->second;
      n.preds.insert(n.preds.end(), st_.xi.begin(), st_.xi.end());
      nodes_.push_back(std::move(n));
      st_.current[l.place] = static_cast<int>(nodes_.size()) - 1;
      if (l.type.is_ref()) st_.targets[l.place] = v.targets;
    }
  }

  void join(const State& other) {
    for (const auto& [leaf, id] : other.current) {
      auto it = st_.current.find(leaf);
      if (it == st_.current.end()) {
        st_.current[leaf] = id;
      } else if (it->second != id) {
        nodes_.push_back(Node{leaf, {it->second, id}, -1});
        it->second = static_cast<int>(nodes_.size()) - 1;
      }
    }
    for (const auto& [k, t] : other.types) st_.types.emplace(k, t);
    for (const auto& [k, s] : other.targets) st_.targets[k].insert(s.begin(), s.end());
  }

  ClosureResult collect() {
    ClosureResult out;
    for (size_t n = 0; n < nodes_.size(); ++n) {
      if (nodes_[n].psi < 0) continue;
      std::set<int> seen;
      std::vector<int> stack(nodes_[n].preds.begin(), nodes_[n].preds.end());
      while (!stack.empty()) {
        int m = stack.back();
        stack.pop_back();
        if (!seen.insert(m).second) continue;
        for (int p : nodes_[static_cast<size_t>(m)].preds) stack.push_back(p);
      }
      const Place& dst = nodes_[n].leaf;
      for (int m : seen) {
        const Place& src = nodes_[static_cast<size_t>(m)].leaf;
        auto pair = std::make_pair(src.str(), dst.str());
        out.flows.insert(pair);
        auto r = resolve(psis_[static_cast<size_t>(nodes_[n].psi)], src, AccessExpr::of_place(dst));
        if (!r.permit) out.denied.insert(pair);
      }
    }
    return out;
  }
};

}  // namespace

ClosureResult dependency_closure(const Program& prog, const std::string& function) {
  const FuncDef* f = prog.find_function(function);
  if (!f) throw Unsupported("no function " + function);
  Walker w(prog);
  return w.run(*f);
}

}  // namespace oracle
