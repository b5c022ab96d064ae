#include "stosdp/sdpa.hpp"

#include "stosdp/errors.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace stosdp {
namespace {

constexpr const char* kSidecarMagic = "stosdp-sdpa-sidecar";
constexpr int kSidecarVersion = 1;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void entry(std::ostream& out, int mat, int blk, int i, int j, double v) {
  out << mat << ' ' << blk << ' ' << i << ' ' << j << ' ' << num(v) << '\n';
}

// Writes the upper triangle of a dense symmetric block.
void block_entries(std::ostream& out, int mat, int blk, const Matrix& a, double sign) {
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = i; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) entry(out, mat, blk, i + 1, j + 1, sign * a(i, j));
    }
  }
}

}  // namespace

void write_sdpa(std::ostream& out, const BlockSdp& sdp) {
  sdp.check();
  const int lp = sdp.num_nonneg() + 2 * sdp.num_free();
  const int nblocks = sdp.num_psd_blocks() + (lp > 0 ? 1 : 0);
  if (nblocks == 0) throw std::invalid_argument("write_sdpa: problem has no variables");
  const int lp_blk = sdp.num_psd_blocks() + 1;

  out << "\"stosdp export: min C.X s.t. A_j.X = b_j, written as the SDPA dual with F0 = -C\n";
  out << sdp.num_rows() << " = mDIM\n";
  out << nblocks << " = nBLOCK\n";
  for (int k : sdp.psd_dims()) out << k << ' ';
  if (lp > 0) out << -lp;
  out << " = bLOCKsTRUCT\n";
  for (int j = 0; j < sdp.num_rows(); ++j) out << (j > 0 ? " " : "") << num(sdp.row(j).rhs);
  out << '\n';

  for (int b = 0; b < sdp.num_psd_blocks(); ++b) {
    block_entries(out, 0, b + 1, sdp.psd_costs()[static_cast<std::size_t>(b)].matrix(), -1.0);
  }
  for (int i = 0; i < sdp.num_nonneg(); ++i) {
    const double d = sdp.nonneg_costs()[static_cast<std::size_t>(i)];
    if (d != 0.0) entry(out, 0, lp_blk, i + 1, i + 1, -d);
  }
  for (int f = 0; f < sdp.num_free(); ++f) {
    const double d = sdp.free_costs()[static_cast<std::size_t>(f)];
    const int pos = sdp.num_nonneg() + 2 * f + 1;
    if (d != 0.0) {
      entry(out, 0, lp_blk, pos, pos, -d);
      entry(out, 0, lp_blk, pos + 1, pos + 1, d);
    }
  }

  for (int j = 0; j < sdp.num_rows(); ++j) {
    const auto& r = sdp.row(j);
    std::vector<Matrix> dense;
    for (int k : sdp.psd_dims()) dense.push_back(Matrix::Zero(k, k));
    Vector nn = Vector::Zero(sdp.num_nonneg());
    Vector fr = Vector::Zero(sdp.num_free());
    for (const auto& [b, a] : r.psd) dense[static_cast<std::size_t>(b)] += a.matrix();
    for (const auto& [i, a] : r.nonneg) nn(i) += a;
    for (const auto& [i, a] : r.free) fr(i) += a;
    for (int b = 0; b < sdp.num_psd_blocks(); ++b) block_entries(out, j + 1, b + 1, dense[static_cast<std::size_t>(b)], 1.0);
    for (int i = 0; i < sdp.num_nonneg(); ++i) {
      if (nn(i) != 0.0) entry(out, j + 1, lp_blk, i + 1, i + 1, nn(i));
    }
    for (int f = 0; f < sdp.num_free(); ++f) {
      const int pos = sdp.num_nonneg() + 2 * f + 1;
      if (fr(f) != 0.0) {
        entry(out, j + 1, lp_blk, pos, pos, fr(f));
        entry(out, j + 1, lp_blk, pos + 1, pos + 1, -fr(f));
      }
    }
  }
}

void write_sidecar(std::ostream& out, const SdpaSidecar& side) {
  out << kSidecarMagic << ' ' << kSidecarVersion << '\n';
  out << "nonneg " << side.n_nonneg << '\n';
  out << "free " << side.n_free << '\n';
  out << "binary " << side.binary_nonneg.size();
  for (int i : side.binary_nonneg) out << ' ' << i;
  out << '\n';
  out << "big_M " << (side.big_M ? num(*side.big_M) : std::string("none")) << '\n';
}

namespace {

SdpaSidecar read_sidecar(std::istream& in) {
  SdpaSidecar side;
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != kSidecarMagic) throw ParseError("sidecar: missing header");
  if (version != kSidecarVersion) throw ParseError("sidecar: unsupported version " + std::to_string(version));
  std::size_t nbin = 0;
  std::string big;
  if (!(in >> word >> side.n_nonneg) || word != "nonneg") throw ParseError("sidecar: expected 'nonneg <count>'");
  if (!(in >> word >> side.n_free) || word != "free") throw ParseError("sidecar: expected 'free <count>'");
  if (!(in >> word >> nbin) || word != "binary") throw ParseError("sidecar: expected 'binary <count> ...'");
  side.binary_nonneg.resize(nbin);
  for (auto& i : side.binary_nonneg) {
    if (!(in >> i) || i < 0 || i >= side.n_nonneg) throw ParseError("sidecar: bad binary index");
  }
  if (!(in >> word >> big) || word != "big_M") throw ParseError("sidecar: expected 'big_M <value|none>'");
  if (big != "none") {
    try {
      side.big_M = std::stod(big);
    } catch (const std::exception&) {
      throw ParseError("sidecar: bad big_M value '" + big + "'");
    }
  }
  return side;
}

// Strips comments and the punctuation SDPA allows around numbers.
std::istringstream sdpa_tokens(std::istream& in) {
  std::string line, text;
  bool header = true;
  while (std::getline(in, line)) {
    if (header && !line.empty() && (line[0] == '"' || line[0] == '*')) continue;
    header = false;
    // "= mDIM" style trailing annotations.
    if (const auto eq = line.find('='); eq != std::string::npos) line.erase(eq);
    for (char& ch : line) {
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    }
    text += line;
    text += '\n';
  }
  return std::istringstream(text);
}

}  // namespace

SdpaImport read_sdpa(std::istream& dat, std::istream& sidecar) {
  SdpaImport res;
  res.side = read_sidecar(sidecar);
  auto in = sdpa_tokens(dat);
  int m = 0, nblocks = 0;
  if (!(in >> m) || m < 0) throw ParseError("sdpa: bad mDIM");
  if (!(in >> nblocks) || nblocks < 1) throw ParseError("sdpa: bad nBLOCK");
  std::vector<int> dims(static_cast<std::size_t>(nblocks));
  for (auto& d : dims) {
    if (!(in >> d) || d == 0) throw ParseError("sdpa: bad block structure");
  }
  Vector b(m);
  for (int j = 0; j < m; ++j) {
    if (!(in >> b(j))) throw ParseError("sdpa: missing entry " + std::to_string(j + 1) + " of the c vector");
  }

  const int lp_size = res.side.n_nonneg + 2 * res.side.n_free;
  int lp_blk = -1;
  std::vector<int> psd_of_blk(static_cast<std::size_t>(nblocks), -1);
  BlockSdp& sdp = res.sdp;
  std::vector<PsdBlockId> ids;
  for (int k = 0; k < nblocks; ++k) {
    const int d = dims[static_cast<std::size_t>(k)];
    if (d < 0) {
      if (lp_blk >= 0) throw ParseError("sdpa: more than one diagonal block");
      if (-d != lp_size) throw ParseError("sdpa: diagonal block size disagrees with the sidecar");
      lp_blk = k;
    } else {
      psd_of_blk[static_cast<std::size_t>(k)] = static_cast<int>(ids.size());
      ids.push_back(sdp.add_psd_block(d));
    }
  }
  if (lp_blk < 0 && lp_size > 0) throw ParseError("sdpa: sidecar lists scalars but there is no diagonal block");

  // Dense accumulation per matrix index.
  struct Dense {
    std::vector<Matrix> psd;
    Vector lp;
  };
  auto fresh = [&] {
    Dense d;
    for (const auto& id : ids) d.psd.push_back(Matrix::Zero(sdp.psd_dim(id), sdp.psd_dim(id)));
    d.lp = Vector::Zero(lp_size);
    return d;
  };
  std::vector<Dense> mats;
  for (int j = 0; j <= m; ++j) mats.push_back(fresh());

  int mat = 0, blk = 0, i = 0, jj = 0;
  double v = 0.0;
  while (in >> mat) {
    if (!(in >> blk >> i >> jj >> v)) throw ParseError("sdpa: truncated entry line");
    if (mat < 0 || mat > m) throw ParseError("sdpa: matrix index " + std::to_string(mat) + " out of range");
    if (blk < 1 || blk > nblocks) throw ParseError("sdpa: block index " + std::to_string(blk) + " out of range");
    const int k = blk - 1;
    const int size = std::abs(dims[static_cast<std::size_t>(k)]);
    if (i < 1 || jj < 1 || i > size || jj > size) throw ParseError("sdpa: entry position out of range");
    auto& d = mats[static_cast<std::size_t>(mat)];
    if (k == lp_blk) {
      if (i != jj) throw ParseError("sdpa: off-diagonal entry in a diagonal block");
      d.lp(i - 1) += v;
    } else {
      auto& a = d.psd[static_cast<std::size_t>(psd_of_blk[static_cast<std::size_t>(k)])];
      a(i - 1, jj - 1) += v;
      if (i != jj) a(jj - 1, i - 1) += v;
    }
  }
  if (!in.eof()) throw ParseError("sdpa: unexpected token in entry list");

  const int nn = res.side.n_nonneg;
  auto free_coef = [&](const Vector& lp, int f) {
    const double plus = lp(nn + 2 * f);
    const double minus = lp(nn + 2 * f + 1);
    if (plus != -minus) throw ParseError("sdpa: split free variable halves disagree");
    return plus;
  };

  const Dense& f0 = mats[0];
  for (std::size_t k = 0; k < ids.size(); ++k) sdp.add_cost(ids[k], SymMatrix(-f0.psd[k]));
  std::vector<NonnegId> nid;
  std::vector<FreeId> fid;
  for (int t = 0; t < nn; ++t) nid.push_back(sdp.add_nonneg(f0.lp.size() > 0 ? -f0.lp(t) : 0.0));
  for (int f = 0; f < res.side.n_free; ++f) fid.push_back(sdp.add_free(-free_coef(f0.lp, f)));

  for (int j = 1; j <= m; ++j) {
    const Dense& d = mats[static_cast<std::size_t>(j)];
    const int row = sdp.add_row(b(j - 1));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (d.psd[k].cwiseAbs().maxCoeff() > 0.0) sdp.add_term(row, ids[k], SymMatrix(d.psd[k]));
    }
    for (int t = 0; t < nn; ++t) {
      if (d.lp(t) != 0.0) sdp.add_term(row, nid[static_cast<std::size_t>(t)], d.lp(t));
    }
    for (int f = 0; f < res.side.n_free; ++f) {
      const double a = free_coef(d.lp, f);
      if (a != 0.0) sdp.add_term(row, fid[static_cast<std::size_t>(f)], a);
    }
  }
  return res;
}

void export_sdpa(const std::filesystem::path& path, const BlockSdp& sdp, const std::vector<int>& binary_nonneg,
                 std::optional<double> big_M) {
  std::ofstream dat(path);
  if (!dat) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_sdpa(dat, sdp);
  std::ofstream side(path.string() + ".sidecar");
  if (!side) throw std::runtime_error("cannot open " + path.string() + ".sidecar for writing");
  write_sidecar(side, SdpaSidecar{sdp.num_nonneg(), sdp.num_free(), binary_nonneg, big_M});
  if (!dat || !side) throw std::runtime_error("write failed for " + path.string());
}

SdpaImport import_sdpa(const std::filesystem::path& path) {
  std::ifstream dat(path);
  if (!dat) throw ParseError("cannot open " + path.string());
  std::ifstream side(path.string() + ".sidecar");
  if (!side) throw ParseError("cannot open " + path.string() + ".sidecar");
  return read_sdpa(dat, side);
}

}  // namespace stosdp
