#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "relapse/nn/network.hpp"

namespace relapse::nn {

inline constexpr const char* kParamFormatLine = "RPNET-PARAMS v1";

// Textual tensor archive:
//   RPNET-PARAMS v1
//   # key: value            (metadata, any number)
//   name rows cols          (one record per tensor)
//   v v v ...               (rows lines, 17 significant digits)
struct ParamFile {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Matrix>> tensors;

  void set_meta(const std::string& key, const std::string& value);
  const std::string& meta_value(const std::string& key) const;
  bool has_tensor(const std::string& name) const;
  const Matrix& tensor(const std::string& name) const;
  void add_tensor(const std::string& name, const Matrix& m) { tensors.emplace_back(name, m); }
};

void write_param_file(std::ostream& out, const ParamFile& file);
ParamFile read_param_file(std::istream& in);

void save_param_file(const std::string& path, const ParamFile& file);
ParamFile load_param_file(const std::string& path);

// Network tensors are stored under their trainable()/all_tensors() names with
// the shape recorded in metadata.
void store_network(ParamFile& file, const NetworkParams& params);
NetworkParams restore_network(const ParamFile& file);

std::string format_double(double v);

}  // namespace relapse::nn
