#include "awrb/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace awrb {

namespace {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

struct Block {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  std::vector<double> data;  // column-major
};

Block matrix_block(std::string name, const Eigen::MatrixXd& M) {
  Block b{std::move(name), M.rows(), M.cols(), {}};
  b.data.assign(M.data(), M.data() + M.size());
  return b;
}

Block snapshot_block(std::string name, const CoeffVector& v) {
  Block b{std::move(name), static_cast<Eigen::Index>(v.size()), 7, {}};
  // Column-major: column c holds field c for all entries.
  b.data.resize(v.size() * 7);
  const std::size_t n = v.size();
  std::size_t r = 0;
  for (const auto& [t, x] : v) {
    for (int d = 0; d < 2; ++d) {
      b.data[(3 * d + 0) * n + r] = t.c[d].j;
      b.data[(3 * d + 1) * n + r] = t.c[d].k;
      b.data[(3 * d + 2) * n + r] = static_cast<int>(t.c[d].kind);
    }
    b.data[6 * n + r] = x;
    ++r;
  }
  return b;
}

CoeffVector snapshot_from(const Block& b, int dim) {
  const std::size_t n = static_cast<std::size_t>(b.rows);
  std::vector<CoeffVector::Entry> e;
  e.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::array<WaveletIndex1D, 2> c{};
    for (int d = 0; d < 2; ++d) {
      c[d].j = static_cast<int>(b.data[(3 * d + 0) * n + r]);
      c[d].k = static_cast<int>(b.data[(3 * d + 1) * n + r]);
      c[d].kind = static_cast<Kind>(static_cast<int>(b.data[(3 * d + 2) * n + r]));
    }
    TensorIndex t = dim == 1 ? TensorIndex(c[0]) : TensorIndex(c[0], c[1]);
    e.emplace_back(t, b.data[6 * n + r]);
  }
  return CoeffVector(std::move(e));
}

Eigen::MatrixXd to_matrix(const Block& b) {
  Eigen::MatrixXd M(b.rows, b.cols);
  if (M.size()) std::memcpy(M.data(), b.data.data(), sizeof(double) * b.data.size());
  return M;
}

void put_u32(std::string& s, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  s.append(buf, 4);
}

void put_u64(std::string& s, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  s.append(buf, 8);
}

template <class T>
T get(const std::string& s, std::size_t pos) {
  if (pos + sizeof(T) > s.size()) throw ModelFormatError("model file truncated");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof(T));
  return v;
}

}  // namespace

std::string serialize_model(const ReducedModel& m) {
  std::vector<Block> blocks;
  blocks.push_back(matrix_block("coords", m.coords));
  blocks.push_back(matrix_block("basis_gram", m.blocks.gram));
  for (std::size_t q = 0; q < m.blocks.B.size(); ++q) blocks.push_back(matrix_block("B" + std::to_string(q), m.blocks.B[q]));
  for (std::size_t p = 0; p < m.blocks.f.size(); ++p) blocks.push_back(matrix_block("f" + std::to_string(p), m.blocks.f[p]));
  if (m.blocks.has_supremizers()) {
    blocks.push_back(matrix_block("T", m.blocks.T));
    blocks.push_back(matrix_block("Feta", m.blocks.Feta));
  }
  blocks.push_back(matrix_block("Cff", m.gram.Cff));
  blocks.push_back(matrix_block("Cfb", m.gram.Cfb));
  blocks.push_back(matrix_block("Cbb", m.gram.Cbb));
  for (std::size_t i = 0; i < m.snapshots.size(); ++i)
    blocks.push_back(snapshot_block("snapshot" + std::to_string(i), m.snapshots[i]));

  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (auto& b : blocks) {
    table.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"offset", offset}});
    offset += 8 * b.data.size();
  }
  nlohmann::json man = {
      {"format", "awrb-model"},
      {"version", kModelVersion},
      {"problem", m.spec},
      {"solver", to_string(m.solver)},
      {"orthonormal", m.orthonormal},
      {"N", m.N()},
      {"Qb", m.gram.Qb},
      {"Qf", m.gram.Qf},
      {"samples", m.samples},
      {"eps", m.eps},
      {"tol", m.tol},
      {"converged", m.converged},
      {"delta", {{"c_delta", m.delta.c_delta}, {"C_delta", m.delta.C_delta}, {"trunc_factor", m.delta.trunc_factor}}},
      {"trunc_tol", m.gram.trunc_tol},
      {"riesz", m.gram.riesz},
      {"stability", m.spec.bounds},
      {"has_supremizers", m.blocks.has_supremizers()},
      {"snapshots", m.snapshots.size()},
      {"blocks", table}};
  const std::string js = man.dump(1);

  std::string out(kModelMagic, 8);
  put_u32(out, kModelVersion);
  put_u32(out, 0);
  put_u64(out, js.size());
  out += js;
  for (auto& b : blocks) out.append(reinterpret_cast<const char*>(b.data.data()), 8 * b.data.size());
  return out;
}

ReducedModel deserialize_model(const std::string& s) {
  if (s.size() < 24 || s.compare(0, 8, kModelMagic) != 0) throw ModelFormatError("not a model file (bad magic)");
  const auto version = get<std::uint32_t>(s, 8);
  if (version != kModelVersion) throw ModelFormatError("unsupported model version " + std::to_string(version));
  const auto len = get<std::uint64_t>(s, 16);
  if (24 + len > s.size()) throw ModelFormatError("model file truncated (manifest)");
  nlohmann::json man;
  try {
    man = nlohmann::json::parse(s.substr(24, len));
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("bad manifest: ") + e.what());
  }
  const std::size_t data0 = 24 + len;

  std::map<std::string, Block> blocks;
  for (auto& t : man.at("blocks")) {
    Block b{t.at("name"), t.at("rows"), t.at("cols"), {}};
    const std::uint64_t off = t.at("offset");
    const std::size_t n = static_cast<std::size_t>(b.rows * b.cols);
    if (data0 + off + 8 * n > s.size()) throw ModelFormatError("model file truncated (block " + b.name + ")");
    b.data.resize(n);
    if (n) std::memcpy(b.data.data(), s.data() + data0 + off, 8 * n);
    blocks.emplace(b.name, std::move(b));
  }
  auto block = [&](const std::string& name) -> const Block& {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw ModelFormatError("missing block " + name);
    return it->second;
  };

  ReducedModel m;
  m.spec = man.at("problem").get<ProblemSpec>();
  m.solver = solver_from_string(man.at("solver"));
  m.orthonormal = man.at("orthonormal");
  m.samples = man.at("samples").get<std::vector<ParameterPoint>>();
  m.eps = man.at("eps").get<std::vector<double>>();
  m.tol = man.at("tol");
  m.converged = man.at("converged");
  m.delta.c_delta = man.at("delta").at("c_delta");
  m.delta.C_delta = man.at("delta").at("C_delta");
  m.delta.trunc_factor = man.at("delta").at("trunc_factor");
  const std::size_t Qb = man.at("Qb"), Qf = man.at("Qf");
  m.coords = to_matrix(block("coords"));
  m.blocks.gram = to_matrix(block("basis_gram"));
  for (std::size_t q = 0; q < m.spec.galerkin_op.size(); ++q) m.blocks.B.push_back(to_matrix(block("B" + std::to_string(q))));
  for (std::size_t p = 0; p < m.spec.rhs.size(); ++p)
    m.blocks.f.push_back(to_matrix(block("f" + std::to_string(p))).col(0));
  if (man.at("has_supremizers").get<bool>()) {
    m.blocks.T = to_matrix(block("T"));
    m.blocks.Feta = to_matrix(block("Feta"));
  }
  m.gram.N = man.at("N");
  m.gram.Qb = Qb;
  m.gram.Qf = Qf;
  m.gram.Cff = to_matrix(block("Cff"));
  m.gram.Cfb = to_matrix(block("Cfb"));
  m.gram.Cbb = to_matrix(block("Cbb"));
  m.gram.trunc_tol = man.at("trunc_tol");
  m.gram.riesz = man.at("riesz").get<RieszConstants>();
  const std::size_t ns = man.at("snapshots");
  const int dim = m.spec.op.trial.basis.dim;
  for (std::size_t i = 0; i < ns; ++i) m.snapshots.push_back(snapshot_from(block("snapshot" + std::to_string(i)), dim));
  if (m.samples.size() != m.gram.N || m.eps.size() != m.gram.N)
    throw ModelFormatError("inconsistent basis size in manifest");
  return m;
}

void save_model(const ReducedModel& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write model file " + path);
  const auto bytes = serialize_model(m);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

ReducedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read model file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace awrb
