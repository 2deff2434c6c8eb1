#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedsac/core/csv.hpp"
#include "fedsac/core/error.hpp"
#include "fedsac/nn/dense_net.hpp"

namespace fedsac::nn {

using csv::format_number;
using csv::parse_double;
using csv::parse_int;
using csv::trim;

inline constexpr int kCheckpointVersion = 1;

/// Text form:
///   densenet <version>
///   sizes <n0> <n1> ...
///   activations relu ... linear
///   params <count>
///   <one number per line>
inline void write_net(std::ostream& out, const DenseNet& net) {
  out << "densenet " << kCheckpointVersion << "\nsizes";
  for (int s : net.sizes()) out << ' ' << s;
  out << "\nactivations";
  for (int k = 0; k < net.num_layers(); ++k) out << ' ' << to_string(net.activation(k));
  out << "\nparams " << net.num_params() << '\n';
  for (Eigen::Index i = 0; i < net.num_params(); ++i) out << format_number(net.params()[i]) << '\n';
}

namespace detail {

inline std::string expect_line(std::istream& in, const std::string& keyword) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: missing '" + keyword + "' line");
  std::istringstream ls(line);
  std::string key;
  ls >> key;
  if (key != keyword) throw ParseError("checkpoint: expected '" + keyword + "', got '" + key + "'");
  std::string rest;
  std::getline(ls, rest);
  return std::string(trim(rest));
}

}  // namespace detail

inline DenseNet read_net(std::istream& in) {
  const auto version = parse_int(detail::expect_line(in, "densenet"), "checkpoint version");
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::vector<int> sizes;
  {
    std::istringstream ss(detail::expect_line(in, "sizes"));
    std::string tok;
    while (ss >> tok) sizes.push_back(static_cast<int>(parse_int(tok, "layer size")));
  }
  if (sizes.size() < 2) throw ParseError("checkpoint: need at least two layer sizes");
  for (int s : sizes) {
    if (s < 1) throw ParseError("checkpoint: layer sizes must be positive");
  }
  DenseNet net(sizes);
  {
    std::istringstream ss(detail::expect_line(in, "activations"));
    std::string tok;
    int k = 0;
    while (ss >> tok) {
      if (k >= net.num_layers() || tok != to_string(net.activation(k))) {
        throw ParseError("checkpoint: unsupported activation layout");
      }
      ++k;
    }
    if (k != net.num_layers()) throw ParseError("checkpoint: activation count mismatch");
  }
  const long long count = parse_int(detail::expect_line(in, "params"), "parameter count");
  if (count != net.num_params()) throw ParseError("checkpoint: parameter count mismatch");
  Eigen::VectorXd p(net.num_params());
  std::string line;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::getline(in, line)) throw ParseError("checkpoint: truncated parameter list");
    p[i] = parse_double(trim(line), "parameter");
  }
  if (!p.allFinite()) throw ParseError("checkpoint: non-finite parameter");
  net.set_params(p);
  return net;
}

/// Named networks and scalars in one text document:
///   bundle <version>
///   net <name>      followed by a write_net block
///   scalar <name> <value>
///   end
struct Bundle {
  std::map<std::string, DenseNet> nets;
  std::map<std::string, double> scalars;
};

inline void write_bundle(std::ostream& out, const Bundle& b) {
  out << "bundle " << kCheckpointVersion << '\n';
  for (const auto& [name, net] : b.nets) {
    out << "net " << name << '\n';
    write_net(out, net);
  }
  for (const auto& [name, value] : b.scalars) out << "scalar " << name << ' ' << format_number(value) << '\n';
  out << "end\n";
}

inline Bundle read_bundle(std::istream& in) {
  const auto version = parse_int(detail::expect_line(in, "bundle"), "bundle version");
  if (version != kCheckpointVersion) throw ParseError("bundle: unsupported version");
  Bundle b;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, name;
    ls >> key;
    if (key == "end") return b;
    ls >> name;
    if (name.empty()) throw ParseError("bundle: entry without a name");
    if (key == "net") {
      b.nets.emplace(name, read_net(in));
    } else if (key == "scalar") {
      std::string value;
      ls >> value;
      b.scalars[name] = parse_double(value, name);
    } else {
      throw ParseError("bundle: unknown entry '" + key + "'");
    }
  }
  throw ParseError("bundle: missing 'end'");
}

inline std::string to_text(const Bundle& b) {
  std::ostringstream out;
  write_bundle(out, b);
  return out.str();
}

inline void save_bundle(const std::filesystem::path& path, const Bundle& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  write_bundle(out, b);
  if (!out) throw ParseError("failed writing " + path.string());
}

inline Bundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  return read_bundle(in);
}

inline void save_net(const std::filesystem::path& path, const DenseNet& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  write_net(out, net);
}

inline DenseNet load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  return read_net(in);
}

}  // namespace fedsac::nn
