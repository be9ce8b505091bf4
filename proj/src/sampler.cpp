#include "bsamp/sampler.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "bsamp/numeric.hpp"

namespace bsamp {

namespace {

const char* construct_name(int kind) {
  switch (static_cast<ExprKind>(kind)) {
    case ExprKind::Seq: return "seq";
    case ExprKind::Set: return "set";
    case ExprKind::Cycle: return "cyc";
    case ExprKind::MSet: return "mset";
    default: return "tuple";
  }
}

void sexpr_rec(const Structure& s, const SamplerTables& t, std::uint32_t idx,
               std::string& out) {
  const StructNode& n = s.nodes[idx];
  switch (n.kind) {
    case StructNode::Kind::Atom: out += t.atom_names[n.label]; break;
    case StructNode::Kind::Class: {
      out += '(';
      out += t.class_names[n.label];
      out += ' ';
      out += std::to_string(n.alt < 0 ? 0 : n.alt);
      for (std::uint32_t c : n.children) {
        out += ' ';
        sexpr_rec(s, t, c, out);
      }
      out += ')';
      break;
    }
    case StructNode::Kind::Construct: {
      out += '(';
      out += construct_name(n.label);
      for (std::uint32_t c : n.children) {
        out += ' ';
        sexpr_rec(s, t, c, out);
      }
      out += ')';
      break;
    }
  }
}

void json_rec(const Structure& s, const SamplerTables& t, std::uint32_t idx,
              std::string& out) {
  const StructNode& n = s.nodes[idx];
  switch (n.kind) {
    case StructNode::Kind::Atom:
      out += "{\"atom\":\"" + t.atom_names[n.label] + "\"}";
      break;
    case StructNode::Kind::Class:
      out += "{\"class\":\"" + t.class_names[n.label] +
             "\",\"alt\":" + std::to_string(n.alt < 0 ? 0 : n.alt) +
             ",\"children\":[";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ',';
        json_rec(s, t, n.children[i], out);
      }
      out += "]}";
      break;
    case StructNode::Kind::Construct:
      out += std::string("{\"construct\":\"") + construct_name(n.label) +
             "\",\"children\":[";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ',';
        json_rec(s, t, n.children[i], out);
      }
      out += "]}";
      break;
  }
}

}  // namespace

std::string Structure::to_sexpr(const SamplerTables& tables) const {
  std::string out;
  sexpr_rec(*this, tables, root, out);
  return out;
}

std::string Structure::to_json(const SamplerTables& tables) const {
  std::string out;
  json_rec(*this, tables, root, out);
  return out;
}

long draw_component_count(CountKind kind, double param, Rng& rng) {
  switch (kind) {
    case CountKind::Geom: {
      if (!(param >= 0.0 && param < 1.0))
        throw std::invalid_argument("Geom parameter must lie in [0,1)");
      const double u = rng.uniform();
      double c = 1.0 - param, cum = c;
      long k = 0;
      while (u >= cum && k < 100000000) {
        c *= param;
        cum += c;
        ++k;
      }
      return k;
    }
    case CountKind::Pois: {
      if (!(param >= 0.0))
        throw std::invalid_argument("Pois rate must be non-negative");
      // additive split keeps e^{-rate} representable
      long total = 0;
      double remaining = param;
      while (remaining > 0) {
        const double lambda = std::min(remaining, 30.0);
        remaining -= lambda;
        const double u = rng.uniform();
        double c = std::exp(-lambda), cum = c;
        long k = 0;
        while (u >= cum && k < 100000000) {
          ++k;
          c *= lambda / k;
          cum += c;
        }
        total += k;
      }
      return total;
    }
    case CountKind::Loga: {
      if (!(param > 0.0 && param < 1.0))
        throw std::invalid_argument("Loga parameter must lie in (0,1)");
      const double u = rng.uniform();
      const double norm = -std::log1p(-param);
      double c = param / norm, cum = c;
      long k = 1;
      while (u >= cum && k < 100000000) {
        ++k;
        c *= param * (k - 1) / k;
        cum += c;
      }
      return k;
    }
  }
  return 0;
}

namespace {

struct Generator {
  const SamplerTables& tables;
  Rng& rng;
  const double cap;
  const int window_atom;  // -1: total size

  Structure st;
  double quantity = 0;
  std::int64_t total = 0;
  bool overflow = false;
  bool failed = false;
  std::string failure;

  Generator(const SamplerTables& t, Rng& r, double c, int wa)
      : tables(t), rng(r), cap(c), window_atom(wa) {
    st.composition.assign(t.atom_names.size(), 0);
  }

  std::uint32_t new_node(StructNode::Kind kind, int label,
                         std::uint32_t parent) {
    StructNode n;
    n.kind = kind;
    n.label = label;
    st.nodes.push_back(std::move(n));
    const auto idx = static_cast<std::uint32_t>(st.nodes.size() - 1);
    if (idx != parent) st.nodes[parent].children.push_back(idx);
    return idx;
  }

  void emit_atom(int atom, long replication, std::uint32_t parent) {
    new_node(StructNode::Kind::Atom, atom, parent);
    st.composition[atom] += replication;
    total += replication * tables.atom_sizes[atom];
    if (window_atom < 0)
      quantity = static_cast<double>(total);
    else
      quantity = static_cast<double>(st.composition[atom]);
    if (quantity > cap) overflow = true;
  }

  // Deep copy of a generated subtree; composition was already counted
  // through the replication multiplier.
  std::uint32_t clone(std::uint32_t src, std::uint32_t parent) {
    const StructNode copy = st.nodes[src];
    const std::uint32_t idx = new_node(copy.kind, copy.label, parent);
    st.nodes[idx].alt = copy.alt;
    for (std::uint32_t c : copy.children) clone(c, idx);
    return idx;
  }

  int pick(const std::vector<double>& cum) {
    const double u = rng.uniform();
    for (std::size_t i = 0; i < cum.size(); ++i)
      if (u < cum[i]) return static_cast<int>(i);
    return static_cast<int>(cum.size()) - 1;
  }

  void fail(const std::string& msg) {
    failed = true;
    if (failure.empty()) failure = msg;
  }

  // Generate the expression node into `parent`. Children of Polya
  // operators multiply the replication factor.
  void gen(int node, int scale, long replication, std::uint32_t parent) {
    if (overflow || failed) return;
    const SamplerNode& n = tables.nodes[node];
    const NodeTable& t = tables.table(node, scale);
    switch (n.kind) {
      case ExprKind::Neutral: return;
      case ExprKind::AtomRef:
        emit_atom(n.atom, replication, parent);
        return;
      case ExprKind::ClassRef: {
        const std::uint32_t cn =
            new_node(StructNode::Kind::Class, n.cls, parent);
        gen(tables.class_root[n.cls], scale, replication, cn);
        return;
      }
      case ExprKind::NameRef: fail("unresolved name"); return;
      case ExprKind::Weighted:
        gen(n.children[0], scale, replication, parent);
        return;
      case ExprKind::Union: {
        const int choice = pick(t.cum);
        if (st.nodes[parent].kind == StructNode::Kind::Class &&
            st.nodes[parent].alt < 0)
          st.nodes[parent].alt = choice;
        gen(n.children[choice], scale, replication, parent);
        return;
      }
      case ExprKind::Product: {
        for (int c : n.children) {
          gen(c, scale, replication, parent);
          if (overflow || failed) return;
        }
        return;
      }
      case ExprKind::Power: {
        for (int i = 0; i < n.power; ++i) {
          gen(n.children[0], scale, replication, parent);
          if (overflow || failed) return;
        }
        return;
      }
      case ExprKind::Seq: {
        long count = 0;
        switch (n.restr) {
          case RestrKind::None:
            count = draw_component_count(CountKind::Geom, t.param, rng);
            break;
          case RestrKind::Eq: count = n.restr_k; break;
          case RestrKind::AtLeast:
            count = n.restr_k +
                    draw_component_count(CountKind::Geom, t.param, rng);
            break;
          case RestrKind::AtMost: count = pick(t.cum); break;
        }
        const std::uint32_t cn =
            new_node(StructNode::Kind::Construct,
                     static_cast<int>(ExprKind::Seq), parent);
        for (long i = 0; i < count; ++i) {
          gen(n.children[0], scale, replication, cn);
          if (overflow || failed) return;
        }
        return;
      }
      case ExprKind::Set: {
        long count = 0;
        switch (n.restr) {
          case RestrKind::None:
            count = draw_component_count(CountKind::Pois, t.param, rng);
            break;
          case RestrKind::Eq: count = n.restr_k; break;
          case RestrKind::AtMost: count = pick(t.cum); break;
          case RestrKind::AtLeast: {
            // zero-truncated Poisson (k = restr_k is 1 here; higher k is
            // rejected at desugar time)
            for (int tries = 0; tries < 1000000; ++tries) {
              count = draw_component_count(CountKind::Pois, t.param, rng);
              if (count >= n.restr_k) break;
            }
            if (count < n.restr_k) {
              fail("Set[>=k] rejection stalled");
              return;
            }
            break;
          }
        }
        const std::uint32_t cn =
            new_node(StructNode::Kind::Construct,
                     static_cast<int>(ExprKind::Set), parent);
        for (long i = 0; i < count; ++i) {
          gen(n.children[0], scale, replication, cn);
          if (overflow || failed) return;
        }
        return;
      }
      case ExprKind::Cycle:
        gen_cycle(node, scale, replication, parent);
        return;
      case ExprKind::MSet:
        gen_mset(node, scale, replication, parent);
        return;
    }
  }

  void gen_cycle(int node, int scale, long replication, std::uint32_t parent) {
    const SamplerNode& n = tables.nodes[node];
    const NodeTable& t = tables.table(node, scale);
    const std::uint32_t cn = new_node(
        StructNode::Kind::Construct, static_cast<int>(ExprKind::Cycle), parent);
    if (tables.kind == SpecKind::Labelled) {
      long count = 0;
      switch (n.restr) {
        case RestrKind::None:
        case RestrKind::AtLeast:
          count = draw_component_count(CountKind::Loga, t.param, rng);
          break;
        case RestrKind::Eq: count = n.restr_k; break;
        case RestrKind::AtMost: count = 1 + pick(t.cum); break;
      }
      for (long i = 0; i < count; ++i) {
        gen(n.children[0], scale, replication, cn);
        if (overflow || failed) return;
      }
      return;
    }
    // Polya cycle
    switch (n.restr) {
      case RestrKind::None:
      case RestrKind::AtLeast: {
        const int k = 1 + pick(t.cum);  // replication order
        const double lambda = t.arg_diag[k - 1];
        const long j = draw_component_count(CountKind::Loga, lambda, rng);
        replicate_block(n.children[0], scale * k, replication * k, j, k, cn);
        return;
      }
      case RestrKind::Eq: {
        // divisor d with probability prop. to phi(d) A(z^d)^{k/d}
        const auto divs = divisors(n.restr_k);
        std::vector<double> w(divs.size());
        double acc = 0;
        for (std::size_t i = 0; i < divs.size(); ++i) {
          const double a = value_of_child(node, scale * static_cast<int>(divs[i]));
          acc += static_cast<double>(totient(divs[i])) *
                 std::pow(a, n.restr_k / static_cast<int>(divs[i]));
          w[i] = acc;
        }
        for (auto& v : w) v /= acc;
        const int di = pick(w);
        const int d = static_cast<int>(divs[di]);
        replicate_block(n.children[0], scale * d, replication * d,
                        n.restr_k / d, d, cn);
        return;
      }
      case RestrKind::AtMost: {
        const int i = 1 + pick(t.cum);
        // delegate to the =i case
        SamplerNode tmp = n;
        (void)tmp;
        gen_cycle_eq(node, scale, replication, i, cn);
        return;
      }
    }
  }

  void gen_cycle_eq(int node, int scale, long replication, int k,
                    std::uint32_t cn) {
    const SamplerNode& n = tables.nodes[node];
    const auto divs = divisors(k);
    std::vector<double> w(divs.size());
    double acc = 0;
    for (std::size_t i = 0; i < divs.size(); ++i) {
      const double a = value_of_child(node, scale * static_cast<int>(divs[i]));
      acc += static_cast<double>(totient(divs[i])) *
             std::pow(a, k / static_cast<int>(divs[i]));
      w[i] = acc;
    }
    for (auto& v : w) v /= acc;
    const int d = static_cast<int>(divs[pick(w)]);
    replicate_block(n.children[0], scale * d, replication * d, k / d, d, cn);
  }

  void gen_mset(int node, int scale, long replication, std::uint32_t parent) {
    const SamplerNode& n = tables.nodes[node];
    const NodeTable& t = tables.table(node, scale);
    const std::uint32_t cn = new_node(
        StructNode::Kind::Construct, static_cast<int>(ExprKind::MSet), parent);
    switch (n.restr) {
      case RestrKind::None: {
        mset_components(node, scale, replication, cn, nullptr);
        return;
      }
      case RestrKind::AtLeast: {
        // zero-truncated full multiset
        for (int tries = 0; tries < 1000000; ++tries) {
          long emitted = 0;
          mset_components(node, scale, replication, cn, &emitted);
          if (overflow || failed) return;
          if (emitted >= 1) return;
        }
        fail("MSet[>=1] rejection stalled");
        return;
      }
      case RestrKind::Eq: {
        mset_eq(node, scale, replication, n.restr_k, cn);
        return;
      }
      case RestrKind::AtMost: {
        const int i = pick(t.cum);  // 0..k
        if (i > 0) mset_eq(node, scale, replication, i, cn);
        return;
      }
    }
  }

  // Draw the per-index Poisson counts of the full multiset and generate.
  void mset_components(int node, int scale, long replication,
                       std::uint32_t cn, long* emitted) {
    const SamplerNode& n = tables.nodes[node];
    const NodeTable& t = tables.table(node, scale);
    for (std::size_t ki = 0; ki < t.arg_diag.size(); ++ki) {
      const int k = static_cast<int>(ki) + 1;
      const double rate = t.arg_diag[ki] / k;
      const long mk = draw_component_count(CountKind::Pois, rate, rng);
      if (emitted) *emitted += mk;
      for (long c = 0; c < mk; ++c) {
        replicate_block(n.children[0], scale * k, replication * k, 1, k, cn);
        if (overflow || failed) return;
      }
    }
  }

  // MSet with exactly k components: choose a partition sequence with
  // probability prop. to its term value, then generate n_i components at
  // index i, each replicated i times.
  void mset_eq(int node, int scale, long replication, int k,
               std::uint32_t cn) {
    const SamplerNode& n = tables.nodes[node];
    const auto parts = partition_sequences(k);
    std::vector<double> cum(parts.size());
    double acc = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      double term = 1.0;
      for (std::size_t i = 0; i < parts[pi].size(); ++i) {
        if (parts[pi][i] == 0) continue;
        const double a = value_of_child(node, scale * static_cast<int>(i + 1));
        term *= std::pow(a, parts[pi][i]) /
                (std::pow(static_cast<double>(i + 1), parts[pi][i]) *
                 factorial(parts[pi][i]));
      }
      acc += term;
      cum[pi] = acc;
    }
    for (auto& v : cum) v /= acc;
    const auto& part = parts[pick(cum)];
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (part[i] == 0) continue;
      const int idx = static_cast<int>(i) + 1;
      for (int c = 0; c < part[i]; ++c) {
        replicate_block(n.children[0], scale * idx, replication * idx, 1, idx,
                        cn);
        if (overflow || failed) return;
      }
    }
  }

  // Generate `count` components at the scaled index and append the whole
  // block `copies` times (identical copies, Polya replication).
  void replicate_block(int child, int scale, long replication, long count,
                       int copies, std::uint32_t parent) {
    std::vector<std::uint32_t> block;
    for (long i = 0; i < count; ++i) {
      const std::uint32_t before =
          static_cast<std::uint32_t>(st.nodes[parent].children.size());
      gen(child, scale, replication, parent);
      if (overflow || failed) return;
      for (std::size_t c = before; c < st.nodes[parent].children.size(); ++c)
        block.push_back(st.nodes[parent].children[c]);
    }
    for (int r = 1; r < copies; ++r)
      for (std::uint32_t b : block) clone(b, parent);
  }

  double value_of_child(int node, int scale) {
    const SamplerNode& n = tables.nodes[node];
    auto it = tables.tables.find({n.children[0], scale});
    if (it != tables.tables.end()) return it->second.value;
    return 0.0;
  }
};

}  // namespace

RawResult sample_raw(const SamplerTables& tables, int cls, Rng& rng,
                     double size_cap, int window_atom) {
  Generator g(tables, rng, size_cap, window_atom);
  const std::uint32_t root =
      static_cast<std::uint32_t>(0);
  StructNode rn;
  rn.kind = StructNode::Kind::Class;
  rn.label = cls;
  g.st.nodes.push_back(rn);
  g.st.root = root;
  g.gen(tables.class_root[cls], 1, 1, root);
  RawResult out;
  out.partial_size = g.total;
  if (!g.overflow && !g.failed) out.structure = std::move(g.st);
  return out;
}

SampleReport sample(const SamplerTables& tables, int cls,
                    const SampleWindow& window, std::uint64_t seed,
                    long max_attempts) {
  SampleReport report;
  report.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  for (long attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(seed, static_cast<std::uint64_t>(attempt));
    report.attempts = attempt + 1;
    RawResult raw = sample_raw(tables, cls, rng, window.hi, window.atom);
    report.cumulative_size += raw.partial_size;
    if (!raw.structure) continue;  // overflow
    const double q =
        window.atom < 0
            ? static_cast<double>(raw.structure->total_size(tables.atom_sizes))
            : static_cast<double>(raw.structure->composition[window.atom]);
    if (q >= window.lo && q <= window.hi) {
      report.structure = std::move(raw.structure);
      break;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!report.structure)
    report.error = "window not hit within max_attempts";
  return report;
}

bool is_right_linear(const CoreSystem& core) {
  for (const auto& c : core.classes) {
    for (const auto& m : c.terms) {
      int class_refs = 0;
      for (const auto& f : m.factors) {
        if (f.kind == FactorKind::Scalar) return false;
        if (f.kind == FactorKind::Class) {
          if (f.scale != 1 || f.power != 1) return false;
          ++class_refs;
        }
      }
      if (class_refs > 1) return false;
    }
  }
  return true;
}

SampleReport sample_interruptible(const SamplerTables& tables,
                                  const CoreSystem& core, int cls,
                                  const SampleWindow& window,
                                  std::uint64_t seed, long max_attempts) {
  SampleReport report;
  report.seed = seed;
  if (!is_right_linear(core)) {
    report.error = "system is not right-linear (rational); use sample()";
    return report;
  }
  const auto t0 = std::chrono::steady_clock::now();

  // Transition view per class: each monomial emits its atoms and moves to
  // its class reference (or terminates).
  struct Move {
    std::vector<std::pair<int, int>> atoms;  // (atom, multiplicity)
    int next = -1;
    double prob_all = 0;   // unconditional cumulative
    double prob_cont = 0;  // cumulative among continuing moves
  };
  // Values at scale 1 are baked into the class tables; recompute the
  // branching from monomial values.
  std::vector<std::vector<Move>> moves(core.classes.size());
  std::vector<double> cls_value(core.classes.size(), 0.0);
  for (std::size_t i = 0; i < core.classes.size(); ++i) {
    for (const auto& m : core.classes[i].terms) {
      Move mv;
      for (const auto& f : m.factors) {
        if (f.kind == FactorKind::Atom)
          mv.atoms.push_back({f.index, f.power});
        else
          mv.next = f.index;
      }
      moves[i].push_back(mv);
    }
  }
  // Branch probabilities need atom values; derive them from any atom leaf
  // table at scale 1 via the tables' stored values.
  std::vector<double> atom_value(tables.atom_names.size(), 0.0);
  {
    // AtomRef node tables hold z_a at scale 1.
    for (std::size_t nidx = 0; nidx < tables.nodes.size(); ++nidx) {
      if (tables.nodes[nidx].kind != ExprKind::AtomRef) continue;
      auto it = tables.tables.find({static_cast<int>(nidx), 1});
      if (it != tables.tables.end())
        atom_value[tables.nodes[nidx].atom] = it->second.value;
    }
  }
  // class values: from the stored class root tables
  for (std::size_t i = 0; i < core.classes.size() && i < tables.class_root.size();
       ++i) {
    auto it = tables.tables.find({tables.class_root[i], 1});
    if (it != tables.tables.end()) cls_value[i] = it->second.value;
  }
  for (std::size_t i = 0; i < core.classes.size(); ++i) {
    double acc = 0, acc_cont = 0, total = 0, total_cont = 0;
    std::vector<double> vals(moves[i].size());
    for (std::size_t j = 0; j < moves[i].size(); ++j) {
      const auto& m = core.classes[i].terms[j];
      double v = m.weight;
      for (const auto& f : m.factors) {
        if (f.kind == FactorKind::Atom)
          v *= std::pow(atom_value[f.index], f.power);
        else
          v *= cls_value[f.index];
      }
      vals[j] = v;
      total += v;
      if (moves[i][j].next >= 0) total_cont += v;
    }
    for (std::size_t j = 0; j < moves[i].size(); ++j) {
      acc += vals[j] / total;
      moves[i][j].prob_all = acc;
      if (moves[i][j].next >= 0 && total_cont > 0) {
        acc_cont += vals[j] / total_cont;
        moves[i][j].prob_cont = acc_cont;
      } else {
        moves[i][j].prob_cont = acc_cont;
      }
    }
  }

  for (long attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(seed, static_cast<std::uint64_t>(attempt));
    report.attempts = attempt + 1;

    Structure st;
    st.composition.assign(tables.atom_names.size(), 0);
    StructNode rn;
    rn.kind = StructNode::Kind::Class;
    rn.label = cls;
    st.nodes.push_back(rn);
    st.root = 0;

    int state = cls;
    double q = 0;
    bool overshoot = false;
    bool accepted = false;
    while (true) {
      const auto& mv = moves[state];
      const double u = rng.uniform();
      // below the window: resume at this state on terminal draws
      const bool below = q < window.lo;
      int choice = -1;
      for (std::size_t j = 0; j < mv.size(); ++j) {
        const double cum = below ? mv[j].prob_cont : mv[j].prob_all;
        if (u < cum) {
          choice = static_cast<int>(j);
          break;
        }
      }
      if (choice < 0) choice = static_cast<int>(mv.size()) - 1;
      if (below && mv[choice].next < 0) {
        // only terminal moves available: dead end, restart
        overshoot = true;
        break;
      }
      for (const auto& [atom, mult] : mv[choice].atoms) {
        for (int c = 0; c < mult; ++c) {
          StructNode an;
          an.kind = StructNode::Kind::Atom;
          an.label = atom;
          st.nodes.push_back(an);
          st.nodes[0].children.push_back(
              static_cast<std::uint32_t>(st.nodes.size() - 1));
        }
        st.composition[atom] += mult;
      }
      q = window.atom < 0
              ? static_cast<double>(st.total_size(tables.atom_sizes))
              : static_cast<double>(st.composition[window.atom]);
      if (q > window.hi) {
        overshoot = true;
        break;
      }
      if (mv[choice].next < 0) {
        accepted = q >= window.lo;
        break;
      }
      state = mv[choice].next;
    }
    report.cumulative_size += st.total_size(tables.atom_sizes);
    if (accepted && !overshoot) {
      report.structure = std::move(st);
      break;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!report.structure)
    report.error = "window not hit within max_attempts";
  return report;
}

}  // namespace bsamp
