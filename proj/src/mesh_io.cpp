#include <bit>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "vtank/error.hpp"
#include "vtank/mesh.hpp"

namespace vtank::mesh {
namespace {

static_assert(std::endian::native == std::endian::little, "binary STL io assumes little-endian host");

constexpr std::size_t kStlHeader = 80;
constexpr std::size_t kStlRecord = 50;
constexpr double kWeldFraction = 1e-7;

struct RawSoup {
  std::vector<Vec3> corners;  // 3 per facet
  SourceFormat format = SourceFormat::StlBinary;
};

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

TriangleMesh weld(const RawSoup& soup) {
  TriangleMesh mesh;
  mesh.source_format = soup.format;
  if (soup.corners.empty()) return mesh;

  Vec3 lo = soup.corners.front(), hi = lo;
  for (const Vec3& p : soup.corners) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  double cell = norm(hi - lo) * kWeldFraction;
  if (!(cell > 0.0)) cell = 1.0;

  std::unordered_map<CellKey, std::uint32_t, CellKeyHash> index;
  auto vertex_id = [&](const Vec3& p) {
    CellKey key{static_cast<std::int64_t>(std::floor((p.x - lo.x) / cell)),
                static_cast<std::int64_t>(std::floor((p.y - lo.y) / cell)),
                static_cast<std::int64_t>(std::floor((p.z - lo.z) / cell))};
    auto [it, inserted] = index.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(p);
    return it->second;
  };

  for (std::size_t i = 0; i + 2 < soup.corners.size(); i += 3) {
    Triangle t{vertex_id(soup.corners[i]), vertex_id(soup.corners[i + 1]),
               vertex_id(soup.corners[i + 2])};
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      ++mesh.collapsed_on_weld;
      continue;
    }
    mesh.triangles.push_back(t);
  }
  return mesh;
}

void require_finite(const Vec3& p, const char* where) {
  if (!is_finite(p)) fail(Errc::MalformedFile, std::string("non-finite coordinate in ") + where);
}

// -- binary STL ---------------------------------------------------------------

std::uint32_t read_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

float read_f32(const char* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

RawSoup parse_binary_stl(std::string_view bytes) {
  RawSoup soup;
  soup.format = SourceFormat::StlBinary;
  std::uint32_t count = read_u32(bytes.data() + kStlHeader);
  soup.corners.reserve(std::size_t{count} * 3);
  const char* rec = bytes.data() + kStlHeader + 4;
  for (std::uint32_t f = 0; f < count; ++f, rec += kStlRecord) {
    for (int c = 0; c < 3; ++c) {
      const char* v = rec + 12 + 12 * c;
      Vec3 p{read_f32(v), read_f32(v + 4), read_f32(v + 8)};
      require_finite(p, "binary STL");
      soup.corners.push_back(p);
    }
  }
  return soup;
}

// -- ASCII STL ----------------------------------------------------------------

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view s) : s_(s) {}

  std::string_view next() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < s_.size() && !is_space(s_[pos_])) ++pos_;
    return s_.substr(start, pos_ - start);
  }

  void skip_line() {
    while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
  }

  bool done() {
    skip_space();
    return pos_ >= s_.size();
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
  void skip_space() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

double parse_number(std::string_view tok, const char* where) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty()) {
    fail(Errc::MalformedFile, std::string("unparsable number '") + std::string(tok) + "' in " + where);
  }
  return v;
}

void expect(Tokenizer& tz, std::string_view keyword) {
  std::string_view tok = tz.next();
  if (tok != keyword) {
    fail(Errc::MalformedFile, "ASCII STL: expected '" + std::string(keyword) + "', found '" +
                                  std::string(tok.empty() ? "<eof>" : tok) + "'");
  }
}

RawSoup parse_ascii_stl(std::string_view bytes) {
  RawSoup soup;
  soup.format = SourceFormat::StlAscii;
  Tokenizer tz(bytes);
  bool in_solid = false;
  while (!tz.done()) {
    std::string_view tok = tz.next();
    if (tok == "solid") {
      if (in_solid) fail(Errc::MalformedFile, "ASCII STL: nested 'solid'");
      in_solid = true;
      tz.skip_line();
    } else if (tok == "endsolid") {
      if (!in_solid) fail(Errc::MalformedFile, "ASCII STL: 'endsolid' without 'solid'");
      in_solid = false;
      tz.skip_line();
    } else if (tok == "facet") {
      if (!in_solid) fail(Errc::MalformedFile, "ASCII STL: 'facet' outside 'solid'");
      expect(tz, "normal");
      for (int i = 0; i < 3; ++i) parse_number(tz.next(), "facet normal");
      expect(tz, "outer");
      expect(tz, "loop");
      for (int c = 0; c < 3; ++c) {
        expect(tz, "vertex");
        Vec3 p;
        p.x = parse_number(tz.next(), "vertex");
        p.y = parse_number(tz.next(), "vertex");
        p.z = parse_number(tz.next(), "vertex");
        require_finite(p, "ASCII STL");
        soup.corners.push_back(p);
      }
      expect(tz, "endloop");
      expect(tz, "endfacet");
    } else {
      fail(Errc::MalformedFile, "ASCII STL: unexpected token '" + std::string(tok) + "'");
    }
  }
  if (in_solid) fail(Errc::MalformedFile, "ASCII STL: missing 'endsolid'");
  if (soup.corners.empty()) fail(Errc::MalformedFile, "ASCII STL: no facets");
  return soup;
}

// -- OBJ ----------------------------------------------------------------------

bool is_freeform_keyword(std::string_view k) {
  static constexpr std::string_view kFreeform[] = {
      "cstype", "deg", "bmat", "step", "curv", "curv2", "surf", "parm", "trim", "hole",
      "scrv",   "sp",  "end",  "con",  "ctech", "stech", "bsp",  "bzp",  "cdc",  "cdp", "res"};
  for (auto f : kFreeform) {
    if (k == f) return true;
  }
  return false;
}

bool is_ignored_keyword(std::string_view k) {
  static constexpr std::string_view kIgnored[] = {"vn", "vt", "vp", "g", "o", "s", "usemtl",
                                                  "mtllib", "l", "p", "mg", "lod", "bevel",
                                                  "c_interp", "d_interp", "shadow_obj",
                                                  "trace_obj", "maplib", "usemap"};
  for (auto f : kIgnored) {
    if (k == f) return true;
  }
  return false;
}

RawSoup parse_obj(std::string_view bytes) {
  std::vector<Vec3> positions;
  std::vector<std::array<long long, 3>> faces;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    Tokenizer tz(line);
    if (tz.done()) continue;
    std::string_view key = tz.next();
    auto where = [&] { return "OBJ line " + std::to_string(line_no); };
    if (key == "v") {
      Vec3 p;
      p.x = parse_number(tz.next(), "OBJ vertex");
      p.y = parse_number(tz.next(), "OBJ vertex");
      p.z = parse_number(tz.next(), "OBJ vertex");
      require_finite(p, "OBJ");
      positions.push_back(p);
    } else if (key == "f") {
      std::vector<long long> idx;
      while (!tz.done()) {
        std::string_view tok = tz.next();
        std::string_view head = tok.substr(0, tok.find('/'));
        long long v = 0;
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
        if (ec != std::errc() || ptr != head.data() + head.size() || v == 0) {
          fail(Errc::MalformedFile, where() + ": bad face index '" + std::string(tok) + "'");
        }
        // Negative indices are relative to the vertices read so far.
        if (v < 0) v = static_cast<long long>(positions.size()) + v + 1;
        if (v <= 0) fail(Errc::MalformedFile, where() + ": face references missing vertex");
        idx.push_back(v - 1);
      }
      if (idx.size() < 3) fail(Errc::MalformedFile, where() + ": face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) faces.push_back({idx[0], idx[k], idx[k + 1]});
    } else if (is_freeform_keyword(key)) {
      fail(Errc::UnsupportedFeature, where() + ": free-form geometry '" + std::string(key) + "' is not supported");
    } else if (!is_ignored_keyword(key)) {
      fail(Errc::MalformedFile, where() + ": unknown record '" + std::string(key.substr(0, 32)) + "'");
    }
  }
  if (faces.empty()) fail(Errc::MalformedFile, "OBJ: no faces");

  RawSoup soup;
  soup.format = SourceFormat::Obj;
  soup.corners.reserve(faces.size() * 3);
  for (const auto& f : faces) {
    for (long long v : f) {
      if (v >= static_cast<long long>(positions.size())) {
        fail(Errc::MalformedFile, "OBJ: face references missing vertex " + std::to_string(v + 1));
      }
      soup.corners.push_back(positions[static_cast<std::size_t>(v)]);
    }
  }
  return soup;
}

bool looks_like_ascii_stl(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size() && (bytes[i] == ' ' || bytes[i] == '\t' || bytes[i] == '\r' || bytes[i] == '\n')) ++i;
  if (bytes.substr(i, 5) != "solid") return false;
  if (i + 5 < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[i + 5]))) return false;
  return bytes.substr(0, 1024).find("facet") != std::string_view::npos;
}

bool ends_with_ci(std::string_view s, std::string_view suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) != suffix[i]) return false;
  }
  return true;
}

}  // namespace

const char* to_string(SourceFormat f) noexcept {
  switch (f) {
    case SourceFormat::StlBinary: return "STL_BINARY";
    case SourceFormat::StlAscii: return "STL_ASCII";
    case SourceFormat::Obj: return "OBJ";
  }
  return "UNKNOWN";
}

TriangleMesh parse_mesh(std::string_view bytes, std::string_view filename_hint) {
  if (bytes.empty()) fail(Errc::MalformedFile, "empty file");

  if (looks_like_ascii_stl(bytes)) return weld(parse_ascii_stl(bytes));

  if (bytes.size() >= kStlHeader + 4) {
    std::uint64_t count = read_u32(bytes.data() + kStlHeader);
    if (bytes.size() == kStlHeader + 4 + kStlRecord * count) {
      if (count == 0) fail(Errc::MalformedFile, "binary STL with zero facets");
      return weld(parse_binary_stl(bytes));
    }
  }

  try {
    return weld(parse_obj(bytes));
  } catch (const Error& e) {
    if (e.code() == Errc::UnsupportedFeature) throw;
    if (ends_with_ci(filename_hint, ".stl") && bytes.size() >= kStlHeader + 4) {
      std::uint64_t count = read_u32(bytes.data() + kStlHeader);
      fail(Errc::MalformedFile, "binary STL: header declares " + std::to_string(count) +
                                    " facets (" + std::to_string(kStlHeader + 4 + kStlRecord * count) +
                                    " bytes) but file has " + std::to_string(bytes.size()) + " bytes");
    }
    if (ends_with_ci(filename_hint, ".obj")) throw;
    fail(Errc::MalformedFile, std::string("unrecognized mesh format (") + e.what() + ")");
  }
}

std::string to_binary_stl(const TriangleMesh& mesh) {
  std::string out(kStlHeader + 4 + kStlRecord * mesh.triangles.size(), '\0');
  constexpr std::string_view header = "vtank binary STL";
  std::memcpy(out.data(), header.data(), header.size());
  auto count = static_cast<std::uint32_t>(mesh.triangles.size());
  std::memcpy(out.data() + kStlHeader, &count, 4);
  char* rec = out.data() + kStlHeader + 4;
  auto put = [](char* dst, const Vec3& v) {
    float f[3] = {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
    std::memcpy(dst, f, 12);
  };
  for (const Triangle& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = cross(b - a, c - a);
    double len = norm(n);
    put(rec, len > 0.0 ? n / len : Vec3{});
    put(rec + 12, a);
    put(rec + 24, b);
    put(rec + 36, c);
    rec += kStlRecord;
  }
  return out;
}

}  // namespace vtank::mesh
