#pragma once

#include "stosdp/block_sdp.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace stosdp {

/// What SDPA cannot express: the nonneg/free split of the diagonal block,
/// integrality of some nonneg scalars, and the big-M constant used to build them.
struct SdpaSidecar {
  int n_nonneg = 0;
  int n_free = 0;
  std::vector<int> binary_nonneg;
  std::optional<double> big_M;
};

/// Writes the problem in SDPA sparse format (.dat-s). The problem is the SDPA
/// dual: F0 = -C, Fj = A_j, c_j = b_j. Nonneg scalars and the two halves of
/// each split free scalar (x = x+ - x-) share one diagonal block of negative size.
void write_sdpa(std::ostream& out, const BlockSdp& sdp);
void write_sidecar(std::ostream& out, const SdpaSidecar& side);

struct SdpaImport {
  BlockSdp sdp;
  SdpaSidecar side;
};

/// Inverse of write_sdpa/write_sidecar. Throws ParseError on malformed input.
SdpaImport read_sdpa(std::istream& dat, std::istream& sidecar);

/// Writes `path` and `path` + ".sidecar".
void export_sdpa(const std::filesystem::path& path, const BlockSdp& sdp, const std::vector<int>& binary_nonneg = {},
                 std::optional<double> big_M = std::nullopt);
SdpaImport import_sdpa(const std::filesystem::path& path);

}  // namespace stosdp
