#include "stresstomo/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "stresstomo/errors.hpp"

namespace stresstomo {
namespace {

static_assert(std::endian::native == std::endian::little, "field files assume a little-endian host");

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw InvalidInput("cannot open '" + path + "' for writing");
  }
  template <class T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void finish(const std::string& path) {
    out_.flush();
    if (!out_) throw InvalidInput("failed writing '" + path + "'");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw InvalidInput("cannot open field file '" + path + "'");
  }
  template <class T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw InvalidInput("truncated field file '" + path_ + "'");
    return v;
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw InvalidInput("truncated field file '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ifstream in_;
};

struct Header {
  FieldRank rank;
  Grid3 grid;
};

Header read_header(Reader& r, const std::string& path) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "STF1", 4) != 0) throw InvalidInput("'" + path + "' is not an STF1 field file");
  const auto rank = r.get<std::uint8_t>();
  if (rank > 2) throw InvalidInput("unknown rank code in '" + path + "'");
  std::array<int, 3> dims{};
  for (int& d : dims) d = static_cast<int>(r.get<std::uint32_t>());
  Vec3 spacing, origin;
  for (double& h : spacing) h = r.get<double>();
  for (double& o : origin) o = r.get<double>();
  const auto code = r.get<std::uint8_t>();
  Domain dom;
  if (code == 0) {
    Vec3 lo, hi;
    for (double& v : lo) v = r.get<double>();
    for (double& v : hi) v = r.get<double>();
    dom = Domain::box(lo, hi);
  } else if (code == 1) {
    Vec3 c;
    for (double& v : c) v = r.get<double>();
    dom = Domain::ball(c, r.get<double>());
  } else {
    throw InvalidInput("unknown domain code in '" + path + "'");
  }
  return {static_cast<FieldRank>(rank), Grid3(dims, spacing, origin, dom)};
}

}  // namespace

template <int NC>
void write_field(const std::string& path, const Field<NC>& field) {
  Writer w(path);
  w.bytes("STF1", 4);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(rank_of_components(NC)));
  const Grid3& g = field.grid();
  for (int d : g.dims()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  for (double h : g.spacing()) w.put<double>(h);
  for (double o : g.origin()) w.put<double>(o);
  const Domain& dom = g.domain();
  if (dom.kind == Domain::Kind::box) {
    w.put<std::uint8_t>(0);
    for (double v : dom.lower) w.put<double>(v);
    for (double v : dom.upper) w.put<double>(v);
  } else {
    w.put<std::uint8_t>(1);
    for (double v : dom.center) w.put<double>(v);
    w.put<double>(dom.radius);
  }
  const auto vals = field.values();
  w.bytes(vals.data(), vals.size() * sizeof(double));
  w.finish(path);
}

template <int NC>
Field<NC> read_field(const std::string& path) {
  Reader r(path);
  const Header h = read_header(r, path);
  if (h.rank != rank_of_components(NC)) throw InvalidInput("field file '" + path + "' has an unexpected rank");
  Field<NC> f(h.grid);
  auto vals = f.values();
  r.bytes(vals.data(), vals.size() * sizeof(double));
  return f;
}

template void write_field<1>(const std::string&, const Field<1>&);
template void write_field<3>(const std::string&, const Field<3>&);
template void write_field<6>(const std::string&, const Field<6>&);
template Field<1> read_field<1>(const std::string&);
template Field<3> read_field<3>(const std::string&);
template Field<6> read_field<6>(const std::string&);

FieldRank field_file_rank(const std::string& path) {
  Reader r(path);
  return read_header(r, path).rank;
}

std::uint64_t config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();  // nlohmann objects keep keys sorted
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace stresstomo
