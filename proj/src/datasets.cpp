#include "eae/datasets.hpp"
#include "eae/blob_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace eae {

namespace {

void check_rows(Index expected, Index actual, const char* field) {
  if (expected != actual) {
    throw DimensionError(std::string("dataset field '") + field + "' has " +
                         std::to_string(actual) + " rows, expected " + std::to_string(expected));
  }
}

BatchXd take_rows(const BatchXd& m, std::span<const Index> rows) {
  BatchXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

void Dataset::validate() const {
  const Index n = rows();
  if (labels) check_rows(n, static_cast<Index>(labels->size()), "labels");
  if (time_derivatives) {
    check_rows(n, time_derivatives->rows(), "time_derivatives");
    if (time_derivatives->cols() != width()) {
      throw DimensionError("time derivatives and inputs differ in width");
    }
  }
  if (latents) check_rows(n, latents->rows(), "latents");
  if (latent_derivatives) check_rows(n, latent_derivatives->rows(), "latent_derivatives");
  if (times) check_rows(n, times->size(), "times");
  if (!inputs.allFinite()) throw DomainError("dataset inputs contain non-finite values");
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  for (Index r : rows) {
    if (r < 0 || r >= this->rows()) throw DimensionError("subset row index out of range");
  }
  Dataset out;
  out.inputs = take_rows(inputs, rows);
  if (labels) {
    out.labels.emplace();
    for (Index r : rows) out.labels->push_back((*labels)[static_cast<std::size_t>(r)]);
  }
  if (time_derivatives) out.time_derivatives = take_rows(*time_derivatives, rows);
  if (latents) out.latents = take_rows(*latents, rows);
  if (latent_derivatives) out.latent_derivatives = take_rows(*latent_derivatives, rows);
  if (times) {
    VectorXd t(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) t[static_cast<Index>(i)] = (*times)[rows[i]];
    out.times = std::move(t);
  }
  out.provenance = provenance;
  return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError("'" + path.string() + "' ends inside its header",
                      static_cast<std::int64_t>(bytes.size()));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

// FNV-1a, enough to tell input files apart in provenance records.
std::string digest(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  if (read_be32(img, 0, images) != 0x00000803u) {
    throw FormatError("'" + images.string() + "' has a bad IDX image magic number", 0);
  }
  const std::size_t n = read_be32(img, 4, images);
  const std::size_t h = read_be32(img, 8, images);
  const std::size_t w = read_be32(img, 12, images);
  const std::size_t pixels = h * w;
  if (img.size() < 16 + n * pixels) {
    throw FormatError("'" + images.string() + "' is truncated: expected " +
                          std::to_string(16 + n * pixels) + " bytes",
                      static_cast<std::int64_t>(img.size()));
  }
  const auto lab = read_file(labels);
  if (read_be32(lab, 0, labels) != 0x00000801u) {
    throw FormatError("'" + labels.string() + "' has a bad IDX label magic number", 0);
  }
  const std::size_t nl = read_be32(lab, 4, labels);
  if (nl != n) {
    throw FormatError("label count " + std::to_string(nl) + " does not match image count " +
                          std::to_string(n),
                      4);
  }
  if (lab.size() < 8 + n) {
    throw FormatError("'" + labels.string() + "' is truncated", static_cast<std::int64_t>(lab.size()));
  }

  Dataset ds;
  ds.inputs.resize(static_cast<Index>(n), static_cast<Index>(pixels));
  for (std::size_t i = 0; i < n * pixels; ++i) ds.inputs.data()[i] = img[16 + i] / 255.0;
  ds.labels.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = lab[8 + i];
    if (label > 9) {
      throw FormatError("label " + std::to_string(label) + " outside 0..9",
                        static_cast<std::int64_t>(8 + i));
    }
    (*ds.labels)[i] = label;
  }
  ds.provenance = {{"source", "idx"},
                   {"images", images.filename().string()},
                   {"labels", labels.filename().string()},
                   {"images_digest", digest(img)},
                   {"labels_digest", digest(lab)}};
  return ds;
}

Dataset gen_oscillator(const OscillatorOptions& o) {
  if (!(o.omega > 0.0)) throw PreconditionError("oscillator frequency must be > 0");
  if (o.embed_dim < 2) throw PreconditionError("embedding dimension must be >= 2");
  if (o.samples < 1 || !(o.dt > 0.0)) throw PreconditionError("need samples >= 1 and dt > 0");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd embed;
  if (o.embedding) {
    embed = *o.embedding;
    if (embed.rows() != 2 || embed.cols() != o.embed_dim) {
      throw DimensionError("embedding must be 2 x embed_dim");
    }
  } else {
    Eigen::MatrixXd g(o.embed_dim, 2);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    embed = (qr.householderQ() * Eigen::MatrixXd::Identity(o.embed_dim, 2)).transpose();
  }
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * M_PI);
  const double phase = phase_dist(rng);

  const auto field = [&](const Eigen::Vector2d& z) {
    return Eigen::Vector2d(o.omega * z[1], -o.omega * z[0]);
  };
  BatchXd z(o.samples, 2);
  BatchXd z_dot(o.samples, 2);
  VectorXd times(o.samples);
  Eigen::Vector2d s(o.radius * std::cos(phase), o.radius * std::sin(phase));
  for (Index t = 0; t < o.samples; ++t) {
    z.row(t) = s.transpose();
    z_dot.row(t) = field(s).transpose();
    times[t] = static_cast<double>(t) * o.dt;
    const Eigen::Vector2d k1 = field(s);
    const Eigen::Vector2d k2 = field(s + 0.5 * o.dt * k1);
    const Eigen::Vector2d k3 = field(s + 0.5 * o.dt * k2);
    const Eigen::Vector2d k4 = field(s + o.dt * k3);
    s += (o.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Dataset ds;
  ds.inputs = z * embed;
  ds.time_derivatives = z_dot * embed;
  ds.latents = std::move(z);
  ds.latent_derivatives = std::move(z_dot);
  ds.times = std::move(times);
  ds.provenance = {{"generator", "oscillator"}, {"omega", o.omega},   {"embed_dim", o.embed_dim},
                   {"samples", o.samples},      {"dt", o.dt},         {"seed", o.seed},
                   {"radius", o.radius},        {"custom_embedding", o.embedding.has_value()}};
  return ds;
}

namespace {

using Field = Eigen::ArrayXXd;

struct LoState {
  Field u;
  Field v;
};

Field laplacian(const Field& f, double inv_h2) {
  const Index n = f.rows();
  Field out(n, n);
  for (Index i = 0; i < n; ++i) {
    const Index ip = (i + 1) % n;
    const Index im = (i + n - 1) % n;
    for (Index j = 0; j < n; ++j) {
      const Index jp = (j + 1) % n;
      const Index jm = (j + n - 1) % n;
      out(i, j) = (f(ip, j) + f(im, j) + f(i, jp) + f(i, jm) - 4.0 * f(i, j)) * inv_h2;
    }
  }
  return out;
}

LoState lo_rhs(const LoState& s, const LambdaOmegaOptions& o, double inv_h2) {
  const Field r2 = s.u.square() + s.v.square();
  const Field lambda = 1.0 - r2;
  const Field omega = -o.beta * r2;
  return {lambda * s.u - omega * s.v + o.diffusion * laplacian(s.u, inv_h2),
          omega * s.u + lambda * s.v + o.diffusion * laplacian(s.v, inv_h2)};
}

LoState axpy(const LoState& s, double a, const LoState& k) { return {s.u + a * k.u, s.v + a * k.v}; }

}  // namespace

Dataset gen_lambda_omega(const LambdaOmegaOptions& o) {
  if (o.grid_n < 16) throw PreconditionError("lambda-omega grid must be at least 16 x 16");
  if (!(o.dt > 0.0) || o.steps < 1 || o.snapshot_every < 1 || o.burn_in < 0) {
    throw PreconditionError("lambda-omega needs dt > 0, steps >= 1, snapshot_every >= 1");
  }
  const Index n = o.grid_n;
  const double h = 2.0 * o.half_width / static_cast<double>(n);
  const double inv_h2 = 1.0 / (h * h);
  // Diffusion spectrum plus the reaction stiffness near the limit cycle
  // (radial relaxation rate 2 and rotation rate β).
  const double cfl = o.dt * (8.0 * o.diffusion * inv_h2 + 2.0 + std::abs(o.beta));
  if (cfl > kLambdaOmegaStabilityLimit) {
    throw StabilityError("time step " + std::to_string(o.dt) + " violates the stability limit (" +
                         std::to_string(cfl) + " > " + std::to_string(kLambdaOmegaStabilityLimit) +
                         ")");
  }

  LoState s{Field::Zero(n, n), Field::Zero(n, n)};
  if (!o.zero_initial) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double x = -o.half_width + h * static_cast<double>(j);
        const double y = -o.half_width + h * static_cast<double>(i);
        const double r = std::hypot(x, y);
        const double th = std::atan2(y, x);
        s.u(i, j) = std::tanh(r * std::cos(th - r)) + o.initial_noise * noise(rng);
        s.v(i, j) = std::tanh(r * std::sin(th - r)) + o.initial_noise * noise(rng);
      }
    }
  }

  const Index snapshots = o.steps / o.snapshot_every;
  if (snapshots < 1) throw PreconditionError("steps must cover at least one snapshot");
  Dataset ds;
  ds.inputs.resize(snapshots, n * n);
  BatchXd u_t(snapshots, n * n);
  VectorXd times(snapshots);
  const Index total = o.burn_in + snapshots * o.snapshot_every;
  Index recorded = 0;
  for (Index step = 0; step < total; ++step) {
    const bool record = step >= o.burn_in && (step - o.burn_in) % o.snapshot_every == 0;
    const LoState k1 = lo_rhs(s, o, inv_h2);
    if (record) {
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          ds.inputs(recorded, i * n + j) = s.u(i, j);
          u_t(recorded, i * n + j) = k1.u(i, j);
        }
      }
      times[recorded++] = static_cast<double>(step) * o.dt;
    }
    const LoState k2 = lo_rhs(axpy(s, 0.5 * o.dt, k1), o, inv_h2);
    const LoState k3 = lo_rhs(axpy(s, 0.5 * o.dt, k2), o, inv_h2);
    const LoState k4 = lo_rhs(axpy(s, o.dt, k3), o, inv_h2);
    s.u += (o.dt / 6.0) * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
    s.v += (o.dt / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    if (!s.u.allFinite() || !s.v.allFinite()) {
      throw DivergenceError("lambda-omega integration diverged at step " + std::to_string(step),
                            step);
    }
  }
  ds.time_derivatives = std::move(u_t);
  ds.times = std::move(times);
  ds.provenance = {{"generator", "lambda_omega"}, {"grid_n", n},
                   {"half_width", o.half_width},  {"dt", o.dt},
                   {"steps", o.steps},            {"burn_in", o.burn_in},
                   {"snapshot_every", o.snapshot_every}, {"diffusion", o.diffusion},
                   {"beta", o.beta},              {"zero_initial", o.zero_initial},
                   {"seed", o.seed},              {"initial_noise", o.initial_noise}};
  return ds;
}

Dataset gen_gaussian_mixture(const GaussianMixtureOptions& o) {
  if (o.components < 1 || o.dim < 1 || o.samples < 1) {
    throw PreconditionError("mixture needs components, dim and samples >= 1");
  }
  if (!(o.stddev >= 0.0) || !(o.mean_scale >= 0.0)) {
    throw PreconditionError("mixture scales must be >= 0");
  }
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd means(o.components, o.dim);
  for (Index i = 0; i < means.size(); ++i) means.data()[i] = o.mean_scale * normal(rng);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(o.components) - 1);

  Dataset ds;
  ds.inputs.resize(o.samples, o.dim);
  ds.labels.emplace(static_cast<std::size_t>(o.samples));
  for (Index r = 0; r < o.samples; ++r) {
    const int c = pick(rng);
    (*ds.labels)[static_cast<std::size_t>(r)] = c;
    for (Index d = 0; d < o.dim; ++d) ds.inputs(r, d) = means(c, d) + o.stddev * normal(rng);
  }
  ds.provenance = {{"generator", "gaussian_mixture"}, {"components", o.components},
                   {"dim", o.dim},                    {"samples", o.samples},
                   {"seed", o.seed},                  {"mean_scale", o.mean_scale},
                   {"stddev", o.stddev}};
  return ds;
}

Dataset gen_linear_toy(const LinearToyOptions& o) {
  if (o.latent_dim < 1 || o.dim < 1 || o.samples < 1 || !(o.noise >= 0.0)) {
    throw PreconditionError("linear toy needs positive sizes and noise >= 0");
  }
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(o.latent_dim, o.dim);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng) / std::sqrt(double(o.latent_dim));
  BatchXd z(o.samples, o.latent_dim);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  Dataset ds;
  ds.inputs = z * w;
  for (Index i = 0; i < ds.inputs.size(); ++i) ds.inputs.data()[i] += o.noise * normal(rng);
  ds.latents = std::move(z);
  ds.provenance = {{"generator", "linear_toy"}, {"latent_dim", o.latent_dim}, {"dim", o.dim},
                   {"samples", o.samples},      {"noise", o.noise},           {"seed", o.seed}};
  return ds;
}

namespace {

std::array<Index, 3> split_sizes(Index n, const std::array<double, 3>& f) {
  for (double x : f) {
    if (!(x >= 0.0)) throw ConfigError("split fractions must be >= 0");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const auto n_train = static_cast<Index>(std::floor(static_cast<double>(n) * f[0] + 1e-9));
  const auto n_val = static_cast<Index>(std::floor(static_cast<double>(n) * f[1] + 1e-9));
  const std::array<Index, 3> sizes{n_train, n_val, n - n_train - n_val};
  static constexpr const char* names[3] = {"train", "validation", "test"};
  for (int i = 0; i < 3; ++i) {
    if (f[static_cast<std::size_t>(i)] > 0.0 && sizes[static_cast<std::size_t>(i)] == 0) {
      throw ConfigError(std::string("split leaves the ") + names[i] + " part empty");
    }
  }
  return sizes;
}

std::vector<Index> seeded_permutation(Index n, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::span<const Index> slice(const std::vector<Index>& v, Index begin, Index count) {
  return std::span<const Index>(v).subspan(static_cast<std::size_t>(begin),
                                          static_cast<std::size_t>(count));
}

}  // namespace

DatasetSplit split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed) {
  const auto sizes = split_sizes(data.rows(), fractions);
  const auto perm = seeded_permutation(data.rows(), seed);
  return {data.subset(slice(perm, 0, sizes[0])), data.subset(slice(perm, sizes[0], sizes[1])),
          data.subset(slice(perm, sizes[0] + sizes[1], sizes[2]))};
}

DatasetSplit split_temporal(const Dataset& data, std::array<double, 3> fractions,
                            std::uint64_t seed) {
  const auto sizes = split_sizes(data.rows(), fractions);
  const Index head = sizes[0] + sizes[1];
  const auto perm = seeded_permutation(head, seed);
  std::vector<Index> tail(static_cast<std::size_t>(sizes[2]));
  std::iota(tail.begin(), tail.end(), head);
  return {data.subset(slice(perm, 0, sizes[0])), data.subset(slice(perm, sizes[0], sizes[1])),
          data.subset(tail)};
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  data.validate();
  io::Blob blob;
  blob.header["format"] = "eae-dataset";
  blob.header["version"] = 1;
  blob.header["provenance"] = data.provenance;
  blob.add_block("inputs", data.inputs);
  if (data.labels) {
    VectorXd l(data.rows());
    for (Index i = 0; i < l.size(); ++i) l[i] = (*data.labels)[static_cast<std::size_t>(i)];
    blob.add_block("labels", l);
  }
  if (data.time_derivatives) blob.add_block("time_derivatives", *data.time_derivatives);
  if (data.latents) blob.add_block("latents", *data.latents);
  if (data.latent_derivatives) blob.add_block("latent_derivatives", *data.latent_derivatives);
  if (data.times) blob.add_block("times", *data.times);
  io::write_blob(path, blob);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const io::Blob blob = io::read_blob(path);
  if (blob.header.value("format", "") != "eae-dataset") {
    throw FormatError("'" + path.string() + "' is not a dataset cache", 9);
  }
  Dataset ds;
  ds.provenance = blob.header.value("provenance", nlohmann::json::object());
  ds.inputs = blob.matrix("inputs");
  if (blob.has_block("labels")) {
    const VectorXd l = blob.vector("labels");
    ds.labels.emplace();
    for (Index i = 0; i < l.size(); ++i) ds.labels->push_back(static_cast<int>(l[i]));
  }
  if (blob.has_block("time_derivatives")) ds.time_derivatives = blob.matrix("time_derivatives");
  if (blob.has_block("latents")) ds.latents = blob.matrix("latents");
  if (blob.has_block("latent_derivatives")) {
    ds.latent_derivatives = blob.matrix("latent_derivatives");
  }
  if (blob.has_block("times")) ds.times = blob.vector("times");
  ds.validate();
  return ds;
}

}  // namespace eae
