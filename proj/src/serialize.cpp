#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "abd/nn.hpp"

namespace abd {

namespace {

constexpr const char* kMagic = "ABDNET 1";

std::vector<Tensor*> arrays_of(Layer& l) {
  std::vector<Tensor*> out;
  for (auto& p : l.params()) out.push_back(&p.value);
  for (auto& b : l.buffers()) out.push_back(&b);
  return out;
}

std::vector<const Tensor*> arrays_of(const Layer& l) {
  std::vector<const Tensor*> out;
  for (const auto& p : l.params()) out.push_back(&p.value);
  for (const auto& b : l.buffers()) out.push_back(&b);
  return out;
}

void put_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double get_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("model file: truncated parameter data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_network(const Network& net, std::ostream& os) {
  os << kMagic << '\n';
  os << "arch " << net.arch() << '\n';
  const auto& tps = net.transfer_points();
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const Layer& l = net.layer(i);
    const auto arrays = arrays_of(l);
    os << "layer " << i << ' ' << l.token();
    if (std::find(tps.begin(), tps.end(), i) != tps.end()) os << '@';
    os << ' ' << arrays.size();
    for (const Tensor* t : arrays) os << ' ' << t->size();
    os << '\n';
  }
  os << "end\n";
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    for (const Tensor* t : arrays_of(net.layer(i))) {
      for (double v : t->data()) put_le(os, v);
    }
  }
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_network(net, os);
  if (!os) throw std::runtime_error("failed writing model file '" + path + "'");
}

std::string network_bytes(const Network& net) {
  std::ostringstream os(std::ios::binary);
  write_network(net, os);
  return os.str();
}

Network read_network(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw std::runtime_error("model file: bad header");
  if (!std::getline(is, line) || line.rfind("arch ", 0) != 0) {
    throw std::runtime_error("model file: missing arch line");
  }
  Network net = Network::parse_arch(line.substr(5));

  std::size_t index = 0;
  while (std::getline(is, line) && line != "end") {
    std::istringstream ls(line);
    std::string tag, token;
    std::size_t i = 0, count = 0;
    ls >> tag >> i >> token >> count;
    if (tag != "layer" || i != index || i >= net.num_layers()) {
      throw std::runtime_error("model file: malformed layer line '" + line + "'");
    }
    const auto arrays = arrays_of(net.layer(i));
    if (count != arrays.size()) {
      throw std::runtime_error("model file: layer " + std::to_string(i) + " declares " + std::to_string(count) +
                               " arrays, architecture expects " + std::to_string(arrays.size()));
    }
    for (const Tensor* t : arrays) {
      std::size_t len = 0;
      ls >> len;
      if (len != t->size()) {
        throw std::runtime_error("model file: array length mismatch in layer " + std::to_string(i));
      }
    }
    ++index;
  }
  if (line != "end" || index != net.num_layers()) throw std::runtime_error("model file: incomplete layer table");

  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    for (Tensor* t : arrays_of(net.layer(i))) {
      for (double& v : t->data()) v = get_le(is);
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("model file: trailing data");
  return net;
}

Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model file '" + path + "'");
  return read_network(is);
}

}  // namespace abd
