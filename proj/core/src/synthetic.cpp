#include "pemix/synthetic.hpp"

#include "pemix/errors.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace pemix {

namespace {

std::string product_label(Index j, Index p) {
  if (p <= 26) return std::string(1, static_cast<char>('A' + j));
  return "P" + std::to_string(j + 1);
}

Vector standard_normal(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(d);
  for (Index k = 0; k < d; ++k) v(k) = nd(rng);
  return v;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n < 1) throw InvalidArgument("synthetic spec: n must be positive");
  if (observed_per_row < 1 || observed_per_row > p) {
    throw InvalidArgument("synthetic spec: block size k=" + std::to_string(observed_per_row) +
                          " must lie in 1..p=" + std::to_string(p));
  }
  if (lambda.rows() != p || lambda.cols() != q || pi.size() != G) {
    throw InvalidArgument("synthetic spec: truth dimensions disagree with n, p, q, G");
  }
  MixtureParams check(pi, mu, lambda, psi);
  (void)check;
}

SyntheticSpec SyntheticSpec::rating_study(Index G, Index q, std::uint64_t truth_seed,
                                          std::uint64_t seed, Index n, Index p, Index k) {
  std::mt19937_64 rng(truth_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  SyntheticSpec s;
  s.n = n;
  s.p = p;
  s.q = q;
  s.G = G;
  s.observed_per_row = k;
  s.seed = seed;
  s.pi = Vector(G);
  for (Index g = 0; g < G; ++g) s.pi(g) = 0.7 + 0.6 * unif(rng);
  s.pi /= s.pi.sum();
  Vector base(p);
  for (Index j = 0; j < p; ++j) base(j) = 5.0 + 2.0 * unif(rng);
  for (Index g = 0; g < G; ++g) {
    Vector m = base;
    for (Index j = 0; j < p; ++j) m(j) += 1.5 * nd(rng);
    s.mu.push_back(m);
  }
  s.lambda = Matrix(p, q);
  for (Index j = 0; j < p; ++j) {
    for (Index c = 0; c < q; ++c) s.lambda(j, c) = 0.7 * nd(rng);
  }
  for (Index g = 0; g < G; ++g) {
    Vector psi(p);
    for (Index j = 0; j < p; ++j) psi(j) = 0.5 + 0.7 * unif(rng);
    s.psi.push_back(psi);
  }
  return s;
}

std::vector<std::vector<bool>> balanced_block_masks(Index n, Index p, Index k, std::uint64_t seed) {
  // Rows take consecutive k-item windows of a stream of random permutations
  // of the products. A window that straddles two permutations forces the
  // items it already took to the back of the next one, so no row repeats a
  // product while every prefix of the stream stays balanced to within one.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<bool>> masks(static_cast<std::size_t>(n),
                                       std::vector<bool>(static_cast<std::size_t>(p), false));
  std::vector<Index> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t pos = 0;
  for (Index i = 0; i < n; ++i) {
    auto& mask = masks[static_cast<std::size_t>(i)];
    Index taken = 0;
    while (taken < k) {
      if (pos == perm.size()) {
        std::vector<Index> fresh;
        std::vector<Index> used;
        for (Index j = 0; j < p; ++j) {
          (mask[static_cast<std::size_t>(j)] ? used : fresh).push_back(j);
        }
        std::shuffle(fresh.begin(), fresh.end(), rng);
        std::shuffle(used.begin(), used.end(), rng);
        perm = fresh;
        perm.insert(perm.end(), used.begin(), used.end());
        pos = 0;
      }
      mask[static_cast<std::size_t>(perm[pos++])] = true;
      ++taken;
    }
  }
  return masks;
}

SyntheticData generate_bib(const SyntheticSpec& spec) {
  spec.validate();
  const Index n = spec.n;
  const Index p = spec.p;
  const Index q = spec.q;
  const Index k = spec.observed_per_row;

  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<Index> component(spec.pi.data(), spec.pi.data() + spec.pi.size());

  SyntheticData out;
  TruthRecord& truth = out.truth;
  truth.spec = spec;
  truth.labels.resize(static_cast<std::size_t>(n));
  truth.factor_scores = Matrix::Zero(n, q);
  std::vector<Vector> full(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Index g = component(rng);
    const auto gi = static_cast<std::size_t>(g);
    const Vector u = standard_normal(q, rng);
    const Vector e = standard_normal(p, rng).cwiseProduct(spec.psi[gi].cwiseSqrt());
    full[static_cast<std::size_t>(i)] = spec.mu[gi] + spec.lambda * u + e;
    truth.labels[static_cast<std::size_t>(i)] = g;
    truth.factor_scores.row(i) = u.transpose();
  }

  const std::uint64_t mask_seed = std::uniform_int_distribution<std::uint64_t>()(rng);
  const auto masks = balanced_block_masks(n, p, k, mask_seed);

  RatingTable& table = out.table;
  for (Index j = 0; j < p; ++j) table.product_names.push_back(product_label(j, p));
  truth.product_counts.assign(static_cast<std::size_t>(p), 0);
  for (Index i = 0; i < n; ++i) {
    const auto& mask = masks[static_cast<std::size_t>(i)];
    for (Index j = 0; j < p; ++j) {
      if (mask[static_cast<std::size_t>(j)]) ++truth.product_counts[static_cast<std::size_t>(j)];
    }
    table.consumer_ids.push_back(std::to_string(i + 1));
    table.rows.emplace_back(full[static_cast<std::size_t>(i)], mask);
  }
  truth.exact_balance = (n * k) % p == 0;
  truth.balance_fallback = false;
  return out;
}

StructuredText truth_to_text(const TruthRecord& truth) {
  const SyntheticSpec& s = truth.spec;
  StructuredText doc;
  doc.set("n", static_cast<std::int64_t>(s.n));
  doc.set("p", static_cast<std::int64_t>(s.p));
  doc.set("q", static_cast<std::int64_t>(s.q));
  doc.set("G", static_cast<std::int64_t>(s.G));
  doc.set("observed_per_row", static_cast<std::int64_t>(s.observed_per_row));
  doc.set("seed", std::to_string(s.seed));
  doc.set("exact_balance", truth.exact_balance);
  doc.set("balance_fallback", truth.balance_fallback);
  doc.add_matrix("pi", s.pi.transpose(), "g");
  Matrix mu(s.G, s.p);
  Matrix psi(s.G, s.p);
  for (Index g = 0; g < s.G; ++g) {
    mu.row(g) = s.mu[static_cast<std::size_t>(g)].transpose();
    psi.row(g) = s.psi[static_cast<std::size_t>(g)].transpose();
  }
  doc.add_matrix("mu", mu, "p");
  doc.add_matrix("psi", psi, "p");
  doc.add_matrix("lambda", s.lambda, "f");
  TextTable counts{"product_counts", {"product", "count"}, {}};
  for (std::size_t j = 0; j < truth.product_counts.size(); ++j) {
    counts.rows.push_back({std::to_string(j + 1), std::to_string(truth.product_counts[j])});
  }
  doc.add_table(std::move(counts));
  TextTable rows{"rows", {"consumer", "component"}, {}};
  for (Index c = 0; c < s.q; ++c) rows.header.push_back("u" + std::to_string(c + 1));
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    std::vector<std::string> r{std::to_string(i + 1), std::to_string(truth.labels[i] + 1)};
    for (Index c = 0; c < s.q; ++c) {
      r.push_back(format_double(truth.factor_scores(static_cast<Index>(i), c)));
    }
    rows.rows.push_back(std::move(r));
  }
  doc.add_table(std::move(rows));
  return doc;
}

TruthRecord truth_from_text(const StructuredText& doc) {
  TruthRecord t;
  SyntheticSpec& s = t.spec;
  s.n = doc.get_int("n");
  s.p = doc.get_int("p");
  s.q = doc.get_int("q");
  s.G = doc.get_int("G");
  s.observed_per_row = doc.get_int("observed_per_row");
  s.seed = std::stoull(doc.get("seed"));
  t.exact_balance = doc.get_bool("exact_balance");
  t.balance_fallback = doc.get_bool("balance_fallback");
  s.pi = doc.matrix("pi").row(0).transpose();
  const Matrix mu = doc.matrix("mu");
  const Matrix psi = doc.matrix("psi");
  for (Index g = 0; g < s.G; ++g) {
    s.mu.push_back(mu.row(g).transpose());
    s.psi.push_back(psi.row(g).transpose());
  }
  s.lambda = s.q > 0 ? doc.matrix("lambda") : Matrix(s.p, 0);
  const Matrix counts = doc.matrix("product_counts");
  for (Index j = 0; j < counts.rows(); ++j) {
    t.product_counts.push_back(static_cast<Index>(counts(j, 1)));
  }
  const Matrix rows = doc.matrix("rows");
  t.factor_scores = Matrix(rows.rows(), s.q);
  for (Index i = 0; i < rows.rows(); ++i) {
    t.labels.push_back(static_cast<Index>(rows(i, 1)) - 1);
    for (Index c = 0; c < s.q; ++c) t.factor_scores(i, c) = rows(i, 2 + c);
  }
  return t;
}

}  // namespace pemix
