#include "relapse/nn/param_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "relapse/errors.hpp"

namespace relapse::nn {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ParamFile::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : meta) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

const std::string& ParamFile::meta_value(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return kv.second;
  throw DataError("parameter file: missing metadata '" + key + "'");
}

bool ParamFile::has_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.first == name) return true;
  return false;
}

const Matrix& ParamFile::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.first == name) return t.second;
  throw DataError("parameter file: missing tensor '" + name + "'");
}

void write_param_file(std::ostream& out, const ParamFile& file) {
  out << kParamFormatLine << '\n';
  for (const auto& [k, v] : file.meta) out << "# " << k << ": " << v << '\n';
  for (const auto& [name, m] : file.tensors) {
    out << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) {
        if (c) out << ' ';
        out << format_double(m(r, c));
      }
      out << '\n';
    }
  }
}

ParamFile read_param_file(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kParamFormatLine) {
    throw DataError("parameter file: expected first line '" + std::string(kParamFormatLine) + "'");
  }
  ParamFile file;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) throw DataError("parameter file line " + std::to_string(lineno) + ": bad metadata");
      file.meta.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    std::istringstream hdr(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(hdr >> name >> rows >> cols)) {
      throw DataError("parameter file line " + std::to_string(lineno) + ": expected 'name rows cols'");
    }
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw DataError("parameter file: truncated tensor '" + name + "'");
      ++lineno;
      std::istringstream row(line);
      for (std::size_t c = 0; c < cols; ++c) {
        std::string tok;
        if (!(row >> tok)) throw DataError("parameter file line " + std::to_string(lineno) + ": short row");
        try {
          m(r, c) = std::stod(tok);
        } catch (const std::exception&) {
          throw DataError("parameter file line " + std::to_string(lineno) + ": bad number '" + tok + "'");
        }
      }
    }
    file.tensors.emplace_back(name, std::move(m));
  }
  return file;
}

void save_param_file(const std::string& path, const ParamFile& file) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_param_file(out, file);
}

ParamFile load_param_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_param_file(in);
}

void store_network(ParamFile& file, const NetworkParams& params) {
  const auto& s = params.shape;
  file.set_meta("input_dim", std::to_string(s.input_dim));
  file.set_meta("hidden_dim", std::to_string(s.hidden_dim));
  file.set_meta("fc1", std::to_string(s.fc1));
  file.set_meta("fc2", std::to_string(s.fc2));
  file.set_meta("dropout", format_double(s.dropout_rate));
  file.set_meta("bn_momentum", format_double(params.bn1.momentum));
  file.set_meta("bn_epsilon", format_double(params.bn1.epsilon));
  for (const auto& t : params.all_tensors()) file.add_tensor(t.name, *t.tensor);
}

NetworkParams restore_network(const ParamFile& file) {
  NetworkShape s;
  try {
    s.input_dim = std::stoul(file.meta_value("input_dim"));
    s.hidden_dim = std::stoul(file.meta_value("hidden_dim"));
    s.fc1 = std::stoul(file.meta_value("fc1"));
    s.fc2 = std::stoul(file.meta_value("fc2"));
    s.dropout_rate = std::stod(file.meta_value("dropout"));
  } catch (const std::logic_error& e) {
    throw DataError(std::string("parameter file: bad shape metadata: ") + e.what());
  }
  NetworkParams p(s);
  p.bn1.momentum = p.bn2.momentum = std::stod(file.meta_value("bn_momentum"));
  p.bn1.epsilon = p.bn2.epsilon = std::stod(file.meta_value("bn_epsilon"));
  for (auto& t : p.all_tensors()) {
    const Matrix& src = file.tensor(t.name);
    if (!src.same_shape(*t.tensor)) throw DataError("parameter file: tensor '" + t.name + "' has wrong shape");
    *t.tensor = src;
  }
  return p;
}

}  // namespace relapse::nn
