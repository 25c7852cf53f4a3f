#pragma once

// Sparse text matrix format, one sample per line:
//
//   #d 5000
//   +1 1:0.5 3:0.25
//   -1
//
// The `#d` header is mandatory. Labels (+1, -1, 1, 0) are optional but must be
// used on every line or none. Indices are 1-based and strictly ascending.
// Values are written with 17 significant digits so doubles round-trip exactly.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flamm/classifier.hpp"
#include "flamm/moments.hpp"

namespace flamm {

struct SparseFile {
  DataMatrix x;
  std::optional<std::vector<int>> labels;

  LabeledSet labeled() const;  // throws InvalidInput if the file has no labels
};

SparseFile read_sparse(std::istream& in);
SparseFile read_sparse(const std::string& path);

void write_sparse(std::ostream& out, const DataMatrix& x,
                  const std::vector<int>* labels = nullptr);
void write_sparse(const std::string& path, const DataMatrix& x,
                  const std::vector<int>* labels = nullptr);

}  // namespace flamm
