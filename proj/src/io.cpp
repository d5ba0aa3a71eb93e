#include "artic/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "artic/errors.hpp"

namespace artic {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  if (!std::isfinite(value)) throw ParameterError("cannot serialize a non-finite number");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return buf.str();
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

[[noreturn]] void format_error(const fs::path& path, const std::string& where,
                               const std::string& what) {
  throw FormatError(path.string() + ":" + where + ": " + what);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// ---------------------------------------------------------------- OBJ

MeshData read_obj(const fs::path& path, const std::string& text) {
  MeshData mesh;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (tokens[0] == "v") {
      if (tokens.size() < 4) format_error(path, where, "vertex needs three coordinates");
      double c[3];
      for (int k = 0; k < 3; ++k)
        if (!parse_number(tokens[1 + k], c[k])) format_error(path, where, "bad vertex coordinate");
      mesh.points.push_back({c[0], c[1], c[2]});
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) format_error(path, where, "face needs at least three vertices");
      std::vector<VertexId> face;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const auto token = tokens[k].substr(0, tokens[k].find('/'));
        long long index = 0;
        if (!parse_number(token, index) || index == 0) format_error(path, where, "bad face index");
        const auto count = static_cast<long long>(mesh.points.size());
        const long long resolved = index > 0 ? index - 1 : count + index;
        if (resolved < 0 || resolved >= count) format_error(path, where, "face index out of range");
        face.push_back(static_cast<VertexId>(resolved));
      }
      for (std::size_t k = 1; k + 1 < face.size(); ++k)
        mesh.triangles.push_back({face[0], face[k], face[k + 1]});
    }
  }
  return mesh;
}

// ---------------------------------------------------------------- PLY

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<Scalar> scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return Scalar::i8;
  if (name == "uchar" || name == "uint8") return Scalar::u8;
  if (name == "short" || name == "int16") return Scalar::i16;
  if (name == "ushort" || name == "uint16") return Scalar::u16;
  if (name == "int" || name == "int32") return Scalar::i32;
  if (name == "uint" || name == "uint32") return Scalar::u32;
  if (name == "float" || name == "float32") return Scalar::f32;
  if (name == "double" || name == "float64") return Scalar::f64;
  return std::nullopt;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::i8:
    case Scalar::u8:
      return 1;
    case Scalar::i16:
    case Scalar::u16:
      return 2;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32:
      return 4;
    case Scalar::f64:
      return 8;
  }
  return 0;
}

bool is_integer(Scalar s) { return s != Scalar::f32 && s != Scalar::f64; }

struct PlyProperty {
  std::string name;
  Scalar type = Scalar::f32;
  bool list = false;
  Scalar count_type = Scalar::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

class PlyCursor {
 public:
  PlyCursor(const fs::path& path, const std::string& text, std::size_t offset, bool binary)
      : path_(path), text_(text), pos_(offset), binary_(binary) {}

  // Returns the next value of the given type as a double.
  double next(Scalar type) {
    if (binary_) return next_binary(type);
    while (token_ >= tokens_.size()) next_line();
    const auto token = tokens_[token_++];
    if (is_integer(type)) {
      long long v = 0;
      if (!parse_number(token, v)) fail("bad integer '" + std::string(token) + "'");
      return static_cast<double>(v);
    }
    double v = 0;
    if (!parse_number(token, v)) fail("bad number '" + std::string(token) + "'");
    return v;
  }

  // In ascii mode every element occupies exactly one line.
  void end_record() {
    if (binary_) return;
    if (token_ < tokens_.size()) fail("unexpected extra values");
    tokens_.clear();
    token_ = 0;
  }

  [[noreturn]] void fail(const std::string& what) const {
    format_error(path_, binary_ ? "byte " + std::to_string(pos_) : "line " + std::to_string(line_), what);
  }

  std::size_t line() const { return line_; }
  void set_line(std::size_t line) { line_ = line; }

 private:
  double next_binary(Scalar type) {
    const std::size_t n = scalar_size(type);
    if (pos_ + n > text_.size()) fail("unexpected end of binary data");
    unsigned char bytes[8];
    std::memcpy(bytes, text_.data() + pos_, n);
    pos_ += n;
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + n);
    switch (type) {
      case Scalar::i8: { std::int8_t v; std::memcpy(&v, bytes, 1); return v; }
      case Scalar::u8: { std::uint8_t v; std::memcpy(&v, bytes, 1); return v; }
      case Scalar::i16: { std::int16_t v; std::memcpy(&v, bytes, 2); return v; }
      case Scalar::u16: { std::uint16_t v; std::memcpy(&v, bytes, 2); return v; }
      case Scalar::i32: { std::int32_t v; std::memcpy(&v, bytes, 4); return v; }
      case Scalar::u32: { std::uint32_t v; std::memcpy(&v, bytes, 4); return v; }
      case Scalar::f32: { float v; std::memcpy(&v, bytes, 4); return v; }
      case Scalar::f64: { double v; std::memcpy(&v, bytes, 8); return v; }
    }
    return 0.0;
  }

  void next_line() {
    while (true) {
      if (pos_ >= text_.size()) fail("unexpected end of file");
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string::npos) end = text_.size();
      ++line_;
      tokens_ = split_ws(std::string_view(text_.data() + pos_, end - pos_));
      token_ = 0;
      pos_ = end + 1;
      if (!tokens_.empty()) return;
    }
  }

  const fs::path& path_;
  const std::string& text_;
  std::size_t pos_;
  bool binary_;
  std::size_t line_ = 0;
  std::vector<std::string_view> tokens_;
  std::size_t token_ = 0;
};

MeshData read_ply(const fs::path& path, const std::string& text) {
  std::size_t pos = 0, line_no = 0;
  auto next_header_line = [&]() -> std::string_view {
    if (pos >= text.size()) format_error(path, "line " + std::to_string(line_no + 1), "missing end_header");
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return line;
  };
  if (next_header_line() != "ply") format_error(path, "line 1", "not a PLY file");

  bool binary = false, have_format = false;
  std::vector<PlyElement> elements;
  while (true) {
    const auto line = next_header_line();
    const auto tokens = split_ws(line);
    const std::string where = "line " + std::to_string(line_no);
    if (tokens.empty()) continue;
    if (tokens[0] == "end_header") break;
    if (tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "format") {
      if (tokens.size() != 3) format_error(path, where, "malformed format line");
      if (tokens[1] == "ascii") binary = false;
      else if (tokens[1] == "binary_little_endian") binary = true;
      else format_error(path, where, "unsupported PLY encoding " + std::string(tokens[1]));
      have_format = true;
    } else if (tokens[0] == "element") {
      std::size_t count = 0;
      if (tokens.size() != 3 || !parse_number(tokens[2], count))
        format_error(path, where, "malformed element line");
      elements.push_back({std::string(tokens[1]), count, {}});
    } else if (tokens[0] == "property") {
      if (elements.empty()) format_error(path, where, "property before any element");
      PlyProperty prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        const auto count_type = scalar_type(tokens[2]);
        const auto item_type = scalar_type(tokens[3]);
        if (!count_type || !item_type || !is_integer(*count_type))
          format_error(path, where, "unsupported list property types");
        prop = {std::string(tokens[4]), *item_type, true, *count_type};
      } else if (tokens.size() == 3) {
        const auto type = scalar_type(tokens[1]);
        if (!type) format_error(path, where, "unknown property type " + std::string(tokens[1]));
        prop = {std::string(tokens[2]), *type, false, Scalar::u8};
      } else {
        format_error(path, where, "malformed property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      format_error(path, where, "unknown header keyword " + std::string(tokens[0]));
    }
  }
  if (!have_format) format_error(path, "header", "missing format line");

  MeshData mesh;
  PlyCursor cursor(path, text, pos, binary);
  cursor.set_line(line_no);
  bool seen_vertex = false;
  for (const PlyElement& element : elements) {
    if (element.name == "vertex") {
      seen_vertex = true;
      int xyz[3] = {-1, -1, -1};
      for (std::size_t k = 0; k < element.properties.size(); ++k) {
        const auto& prop = element.properties[k];
        const int axis = prop.name == "x" ? 0 : prop.name == "y" ? 1 : prop.name == "z" ? 2 : -1;
        if (axis < 0) continue;
        if (prop.list || (prop.type != Scalar::f32 && prop.type != Scalar::f64))
          format_error(path, "header", "vertex coordinates must be float or double");
        xyz[axis] = static_cast<int>(k);
      }
      if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0)
        format_error(path, "header", "vertex element lacks x, y or z");
      mesh.points.reserve(element.count);
      for (std::size_t v = 0; v < element.count; ++v) {
        double c[3] = {0, 0, 0};
        for (std::size_t k = 0; k < element.properties.size(); ++k) {
          const auto& prop = element.properties[k];
          if (prop.list) {
            const auto n = static_cast<std::size_t>(cursor.next(prop.count_type));
            for (std::size_t t = 0; t < n; ++t) cursor.next(prop.type);
            continue;
          }
          const double value = cursor.next(prop.type);
          for (int a = 0; a < 3; ++a)
            if (xyz[a] == static_cast<int>(k)) c[a] = value;
        }
        cursor.end_record();
        mesh.points.push_back({c[0], c[1], c[2]});
      }
    } else if (element.name == "face") {
      if (!seen_vertex) format_error(path, "header", "face element precedes vertex element");
      int list = -1;
      for (std::size_t k = 0; k < element.properties.size(); ++k) {
        const auto& prop = element.properties[k];
        if (prop.list && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
          if (!is_integer(prop.type)) format_error(path, "header", "face indices must be integers");
          list = static_cast<int>(k);
        }
      }
      if (list < 0) format_error(path, "header", "face element lacks vertex_indices");
      for (std::size_t f = 0; f < element.count; ++f) {
        std::vector<VertexId> face;
        for (std::size_t k = 0; k < element.properties.size(); ++k) {
          const auto& prop = element.properties[k];
          if (!prop.list) {
            cursor.next(prop.type);
            continue;
          }
          const double n = cursor.next(prop.count_type);
          if (n < 0) cursor.fail("negative list length");
          for (std::size_t t = 0; t < static_cast<std::size_t>(n); ++t) {
            const double index = cursor.next(prop.type);
            if (static_cast<int>(k) != list) continue;
            if (index < 0 || index >= static_cast<double>(mesh.points.size()))
              cursor.fail("face index out of range");
            face.push_back(static_cast<VertexId>(index));
          }
        }
        cursor.end_record();
        if (face.size() < 3) cursor.fail("face with fewer than three vertices");
        for (std::size_t k = 1; k + 1 < face.size(); ++k)
          mesh.triangles.push_back({face[0], face[k], face[k + 1]});
      }
    } else {
      for (std::size_t r = 0; r < element.count; ++r) {
        for (const auto& prop : element.properties) {
          if (prop.list) {
            const auto n = static_cast<std::size_t>(cursor.next(prop.count_type));
            for (std::size_t t = 0; t < n; ++t) cursor.next(prop.type);
          } else {
            cursor.next(prop.type);
          }
        }
        cursor.end_record();
      }
    }
  }
  if (!seen_vertex) format_error(path, "header", "no vertex element");
  return mesh;
}

}  // namespace

MeshData read_mesh(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext != ".ply" && ext != ".obj")
    throw FormatError(path.string() + ": unsupported mesh format '" + ext + "' (expected .ply or .obj)");
  const std::string text = read_file(path);
  return ext == ".ply" ? read_ply(path, text) : read_obj(path, text);
}

void write_ply(const fs::path& path, const PointSet& points, const std::vector<Triangle>& triangles,
               PlyEncoding encoding, const std::vector<Color>* colors) {
  if (colors && colors->size() != points.size())
    throw ParameterError("one color per vertex is required");
  const bool binary = encoding == PlyEncoding::binary;
  std::string out = "ply\nformat ";
  out += binary ? "binary_little_endian 1.0\n" : "ascii 1.0\n";
  out += "element vertex " + std::to_string(points.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "element face " + std::to_string(triangles.size()) + "\n";
  out += "property list uchar int vertex_indices\nend_header\n";

  auto put = [&](const auto& value) {
    char bytes[sizeof value];
    std::memcpy(bytes, &value, sizeof value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof value);
    out.append(bytes, sizeof value);
  };
  for (std::size_t j = 0; j < points.size(); ++j) {
    const Eigen::Vector3d p = points[j];
    if (binary) {
      put(p.x());
      put(p.y());
      put(p.z());
      if (colors)
        for (std::uint8_t c : (*colors)[j]) put(c);
    } else {
      out += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z());
      if (colors)
        for (std::uint8_t c : (*colors)[j]) out += " " + std::to_string(c);
      out += "\n";
    }
  }
  for (const Triangle& t : triangles) {
    if (binary) {
      put(std::uint8_t{3});
      for (VertexId v : t) put(static_cast<std::int32_t>(v));
    } else {
      out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
    }
  }
  write_file_atomic(path, out);
}

void write_obj(const fs::path& path, const PointSet& points, const std::vector<Triangle>& triangles) {
  std::string out;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const Eigen::Vector3d p = points[j];
    out += "v " + format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + "\n";
  }
  for (const Triangle& t : triangles)
    out += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " +
           std::to_string(t[2] + 1) + "\n";
  write_file_atomic(path, out);
}

void write_mesh(const fs::path& path, const PointSet& points, const std::vector<Triangle>& triangles) {
  const std::string ext = lower_extension(path);
  if (ext == ".ply") return write_ply(path, points, triangles);
  if (ext == ".obj") return write_obj(path, points, triangles);
  throw ParameterError("unsupported mesh extension '" + ext + "'");
}

RegisteredSet load_registered_set(const fs::path& template_path,
                                  const std::vector<fs::path>& instance_paths,
                                  std::vector<std::string>* warnings) {
  if (instance_paths.empty()) throw ParameterError("at least one instance mesh is required");
  MeshData templ = read_mesh(template_path);
  if (templ.triangles.empty())
    throw StructuralError(template_path.string() + ": template mesh has no faces");
  std::vector<PointSet> instances;
  for (const auto& path : instance_paths) {
    MeshData inst = read_mesh(path);
    if (inst.points.size() != templ.points.size())
      throw CorrespondenceError(path.string() + " has " + std::to_string(inst.points.size()) +
                                " vertices but template " + template_path.string() + " has " +
                                std::to_string(templ.points.size()));
    if (!inst.triangles.empty() && inst.triangles != templ.triangles && warnings)
      warnings->push_back(path.string() + ": faces differ from the template and are ignored");
    instances.push_back(std::move(inst.points));
  }
  Mesh mesh;
  try {
    mesh = Mesh(std::move(templ.points), std::move(templ.triangles));
  } catch (const StructuralError& e) {
    throw StructuralError(template_path.string() + ": " + e.what());
  }
  return RegisteredSet(std::move(mesh), std::move(instances));
}

Color part_color(PartId part) {
  // Golden-ratio hue steps keep consecutive ids far apart.
  const double hue = std::fmod(0.13 + 0.6180339887498949 * part, 1.0) * 6.0;
  const double s = 0.65, v = 0.95;
  const int sector = static_cast<int>(hue) % 6;
  const double f = hue - std::floor(hue);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  auto byte = [](double c) { return static_cast<std::uint8_t>(std::lround(c * 255.0)); };
  return {byte(r), byte(g), byte(b)};
}

// ---------------------------------------------------------------- JSON

namespace {

class JsonWriter {
 public:
  std::string take() { return std::move(out_); }

  JsonWriter& raw(std::string_view s) {
    out_ += s;
    return *this;
  }
  JsonWriter& number(double v) { return raw(format_double(v)); }
  JsonWriter& integer(std::uint64_t v) { return raw(std::to_string(v)); }
  JsonWriter& string(std::string_view s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
    return *this;
  }
  JsonWriter& key(std::string_view k) {
    string(k);
    out_ += ": ";
    return *this;
  }
  JsonWriter& vec(const Eigen::Vector3d& v) {
    return raw("[").number(v.x()).raw(", ").number(v.y()).raw(", ").number(v.z()).raw("]");
  }
  template <typename Range>
  JsonWriter& integers(const Range& values) {
    out_ += '[';
    bool first = true;
    for (auto v : values) {
      if (!first) out_ += ", ";
      first = false;
      out_ += std::to_string(v);
    }
    out_ += ']';
    return *this;
  }
  JsonWriter& transform(const RigidTransform& t) {
    const auto& q = t.rotation();
    raw("{").key("quaternion").raw("[").number(q.w()).raw(", ").number(q.x()).raw(", ");
    number(q.y()).raw(", ").number(q.z()).raw("], ");
    return key("translation").vec(t.translation()).raw("}");
  }

 private:
  std::string out_;
};

void write_parts(JsonWriter& w, const PartLabeling& labeling, const TransformSet& ts) {
  std::vector<std::vector<VertexId>> members(labeling.part_count);
  for (VertexId j = 0; j < labeling.vertex_count(); ++j) members[labeling.labels[j]].push_back(j);
  w.key("parts").raw("[");
  for (PartId p = 0; p < labeling.part_count; ++p) {
    w.raw(p ? ",\n    " : "\n    ").raw("{").key("id").integer(p + 1).raw(", ");
    w.key("vertex_indices").integers(members[p]).raw(", ").key("transforms").raw("[");
    for (std::size_t i = 0; i < ts.instance_count(); ++i) {
      if (i) w.raw(", ");
      w.transform(ts(i, p));
    }
    w.raw("]}");
  }
  w.raw(labeling.part_count ? "\n  ]" : "]");
}

[[noreturn]] void json_error(const std::string& where, const std::string& what) {
  throw FormatError(where + ": " + what);
}

void expect_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) json_error(where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) json_error(where, "unknown key '" + k + "'");
  for (const char* k : keys)
    if (!obj.contains(k)) json_error(where, "missing key '" + std::string(k) + "'");
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) json_error(where, "expected a number");
  return v.get<double>();
}

std::uint64_t get_unsigned(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) json_error(where, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) json_error(where, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) json_error(where, "expected a string");
  return v.get<std::string>();
}

Eigen::Vector3d get_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) json_error(where, "expected three numbers");
  return {get_number(v[0], where), get_number(v[1], where), get_number(v[2], where)};
}

RigidTransform get_transform(const json& v, const std::string& where) {
  expect_keys(v, {"quaternion", "translation"}, where);
  const json& q = v["quaternion"];
  if (!q.is_array() || q.size() != 4) json_error(where, "quaternion needs four numbers");
  Eigen::Quaterniond rot(get_number(q[0], where), get_number(q[1], where), get_number(q[2], where),
                         get_number(q[3], where));
  if (std::abs(rot.norm() - 1.0) > 1e-9) json_error(where, "quaternion is not unit length");
  return RigidTransform(rot, get_vec3(v["translation"], where));
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": invalid JSON at byte " + std::to_string(e.byte));
  }
}

// Labels and transforms from a "parts" array with one-based ids 1..P in order.
void read_parts(const json& parts, PartLabeling& labeling, TransformSet& ts,
                std::optional<std::size_t> instances) {
  if (!parts.is_array() || parts.empty()) json_error("parts", "expected a non-empty array");
  std::vector<std::vector<VertexId>> members;
  std::vector<std::vector<RigidTransform>> transforms;
  std::size_t total = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::string where = "parts[" + std::to_string(p) + "]";
    const json& part = parts[p];
    expect_keys(part, {"id", "vertex_indices", "transforms"}, where);
    if (get_unsigned(part["id"], where + ".id") != p + 1)
      json_error(where, "part ids must run 1..P in order");
    const json& idx = part["vertex_indices"];
    if (!idx.is_array()) json_error(where, "vertex_indices must be an array");
    std::vector<VertexId> m;
    for (const auto& v : idx) m.push_back(static_cast<VertexId>(get_unsigned(v, where + ".vertex_indices")));
    total += m.size();
    members.push_back(std::move(m));
    const json& tr = part["transforms"];
    if (!tr.is_array()) json_error(where, "transforms must be an array");
    std::vector<RigidTransform> row;
    for (std::size_t i = 0; i < tr.size(); ++i)
      row.push_back(get_transform(tr[i], where + ".transforms[" + std::to_string(i) + "]"));
    if (!transforms.empty() && row.size() != transforms.front().size())
      json_error(where, "every part needs one transform per instance");
    if (instances && row.size() != *instances) json_error(where, "transform count mismatch");
    transforms.push_back(std::move(row));
  }
  labeling.part_count = static_cast<PartId>(members.size());
  labeling.labels.assign(total, 0);
  std::vector<bool> seen(total, false);
  for (PartId p = 0; p < members.size(); ++p)
    for (VertexId j : members[p]) {
      if (j >= total || seen[j]) json_error("parts", "vertex indices must cover 0..J-1 exactly once");
      seen[j] = true;
      labeling.labels[j] = p;
    }
  ts = TransformSet(transforms.front().size(), members.size());
  for (std::size_t p = 0; p < members.size(); ++p)
    for (std::size_t i = 0; i < transforms[p].size(); ++i) ts(i, p) = transforms[p][i];
}

std::array<PartId, 2> get_pair(const json& v, PartId part_count, const std::string& where) {
  if (!v.is_array() || v.size() != 2) json_error(where, "expected a pair of part ids");
  const auto a = get_unsigned(v[0], where), b = get_unsigned(v[1], where);
  if (a < 1 || b < 1 || a > part_count || b > part_count || a == b)
    json_error(where, "joint parts must be two distinct existing ids");
  return {static_cast<PartId>(a - 1), static_cast<PartId>(b - 1)};
}

const char* init_name(InitMethod m) { return m == InitMethod::patches ? "patches" : "cluster"; }

}  // namespace

bool operator==(const ModelFile& a, const ModelFile& b) {
  auto same_joints = [](const std::vector<Joint>& x, const std::vector<Joint>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x[k].parts != y[k].parts || x[k].position != y[k].position || x[k].residual != y[k].residual)
        return false;
    return true;
  };
  const EMConfig& c = a.config;
  const EMConfig& d = b.config;
  return a.labeling == b.labeling && a.transforms == b.transforms && same_joints(a.joints, b.joints) &&
         a.params.sigma_sq == b.params.sigma_sq && a.params.tau == b.params.tau && a.gamma == b.gamma &&
         c.initial_part_count == d.initial_part_count && c.init == d.init && c.tau == d.tau &&
         c.sigma_multiple == d.sigma_multiple && c.delta_start_fraction == d.delta_start_fraction &&
         c.delta_growth == d.delta_growth && c.max_iterations == d.max_iterations &&
         c.epsilon == d.epsilon && c.hop_radius == d.hop_radius && c.seed == d.seed &&
         a.converged == b.converged && a.iterations == b.iterations &&
         a.meta.template_path == b.meta.template_path &&
         a.meta.instance_paths == b.meta.instance_paths && a.meta.seed == b.meta.seed;
}

ModelFile make_model_file(const ArticulatedModel& model, const EMResult& em, const EMConfig& config,
                          std::optional<double> gamma, RunInfo meta) {
  ModelFile file;
  file.labeling = model.labeling;
  file.transforms = model.transforms;
  file.joints = model.joints;
  file.params = em.params;
  file.gamma = gamma;
  file.config = config;
  file.converged = em.trace.converged;
  file.iterations = em.trace.records.size();
  file.meta = std::move(meta);
  return file;
}

std::string model_to_json(const ModelFile& model) {
  JsonWriter w;
  w.raw("{\n  ");
  write_parts(w, model.labeling, model.transforms);
  w.raw(",\n  ").key("joints").raw("[");
  for (std::size_t k = 0; k < model.joints.size(); ++k) {
    const Joint& j = model.joints[k];
    w.raw(k ? ",\n    " : "\n    ").raw("{").key("parts");
    w.raw("[").integer(j.parts[0] + 1).raw(", ").integer(j.parts[1] + 1).raw("], ");
    w.key("position").vec(j.position).raw(", ").key("residual").number(j.residual).raw("}");
  }
  w.raw(model.joints.empty() ? "]" : "\n  ]");
  const EMConfig& c = model.config;
  w.raw(",\n  ").key("params").raw("{");
  w.key("tau").number(model.params.tau).raw(", ");
  w.key("sigma_sq").number(model.params.sigma_sq).raw(", ");
  w.key("s").number(model.params.s()).raw(", ");
  w.key("delta").number(model.params.delta()).raw(", ");
  w.key("gamma");
  if (model.gamma) w.number(*model.gamma); else w.raw("null");
  w.raw(", ").key("sigma_multiple").number(c.sigma_multiple).raw(", ");
  w.key("initial_part_count").integer(c.initial_part_count).raw(", ");
  w.key("init").string(init_name(c.init)).raw(", ");
  w.key("delta_start_fraction").number(c.delta_start_fraction).raw(", ");
  w.key("delta_growth").number(c.delta_growth).raw(", ");
  w.key("max_iterations").integer(c.max_iterations).raw(", ");
  w.key("epsilon").number(c.epsilon).raw(", ");
  w.key("hop_radius").integer(c.hop_radius).raw(", ");
  w.key("converged").raw(model.converged ? "true" : "false").raw(", ");
  w.key("iterations").integer(model.iterations).raw("}");
  w.raw(",\n  ").key("meta").raw("{").key("template").string(model.meta.template_path).raw(", ");
  w.key("instances").raw("[");
  for (std::size_t i = 0; i < model.meta.instance_paths.size(); ++i) {
    if (i) w.raw(", ");
    w.string(model.meta.instance_paths[i]);
  }
  w.raw("], ").key("seed").integer(model.meta.seed).raw("}\n}\n");
  return w.take();
}

ModelFile model_from_json(const std::string& text) {
  const json doc = parse_json(text, "model");
  expect_keys(doc, {"parts", "joints", "params", "meta"}, "model");
  ModelFile model;
  read_parts(doc["parts"], model.labeling, model.transforms, std::nullopt);

  const json& joints = doc["joints"];
  if (!joints.is_array()) json_error("joints", "expected an array");
  for (std::size_t k = 0; k < joints.size(); ++k) {
    const std::string where = "joints[" + std::to_string(k) + "]";
    expect_keys(joints[k], {"parts", "position", "residual"}, where);
    Joint j;
    j.parts = get_pair(joints[k]["parts"], model.labeling.part_count, where);
    j.position = get_vec3(joints[k]["position"], where);
    j.residual = get_number(joints[k]["residual"], where);
    model.joints.push_back(j);
  }

  const json& params = doc["params"];
  expect_keys(params,
              {"tau", "sigma_sq", "s", "delta", "gamma", "sigma_multiple", "initial_part_count", "init",
               "delta_start_fraction", "delta_growth", "max_iterations", "epsilon", "hop_radius",
               "converged", "iterations"},
              "params");
  model.params.tau = get_number(params["tau"], "params.tau");
  model.params.sigma_sq = get_number(params["sigma_sq"], "params.sigma_sq");
  if (!params["gamma"].is_null()) {
    model.gamma = get_number(params["gamma"], "params.gamma");
    model.params.gamma = *model.gamma;
  }
  EMConfig& c = model.config;
  c.tau = model.params.tau;
  c.sigma_multiple = get_number(params["sigma_multiple"], "params.sigma_multiple");
  c.initial_part_count = get_unsigned(params["initial_part_count"], "params.initial_part_count");
  const std::string init = get_string(params["init"], "params.init");
  if (init == "patches") c.init = InitMethod::patches;
  else if (init == "cluster") c.init = InitMethod::cluster;
  else json_error("params.init", "expected patches or cluster");
  c.delta_start_fraction = get_number(params["delta_start_fraction"], "params.delta_start_fraction");
  c.delta_growth = get_number(params["delta_growth"], "params.delta_growth");
  c.max_iterations = get_unsigned(params["max_iterations"], "params.max_iterations");
  c.epsilon = get_number(params["epsilon"], "params.epsilon");
  c.hop_radius = static_cast<unsigned>(get_unsigned(params["hop_radius"], "params.hop_radius"));
  model.converged = get_bool(params["converged"], "params.converged");
  model.iterations = get_unsigned(params["iterations"], "params.iterations");

  const json& meta = doc["meta"];
  expect_keys(meta, {"template", "instances", "seed"}, "meta");
  model.meta.template_path = get_string(meta["template"], "meta.template");
  if (!meta["instances"].is_array()) json_error("meta.instances", "expected an array");
  for (const auto& s : meta["instances"]) model.meta.instance_paths.push_back(get_string(s, "meta.instances"));
  model.meta.seed = get_unsigned(meta["seed"], "meta.seed");
  c.seed = model.meta.seed;
  return model;
}

ModelFile read_model(const fs::path& path) {
  try {
    return model_from_json(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string ground_truth_to_json(const GroundTruth& truth, const SynthSpec& spec) {
  JsonWriter w;
  w.raw("{\n  ");
  write_parts(w, truth.labeling, truth.transforms);
  w.raw(",\n  ").key("joints").raw("[");
  for (std::size_t k = 0; k < truth.joints.size(); ++k) {
    const TrueJoint& j = truth.joints[k];
    w.raw(k ? ",\n    " : "\n    ").raw("{").key("parts");
    w.raw("[").integer(j.parts[0] + 1).raw(", ").integer(j.parts[1] + 1).raw("], ");
    w.key("position").vec(j.position).raw(", ").key("axis").vec(j.axis).raw("}");
  }
  w.raw(truth.joints.empty() ? "]" : "\n  ]");
  w.raw(",\n  ").key("boundary_vertices").integers(truth.boundary_vertices);
  w.raw(",\n  ").key("spec").raw("{");
  w.key("part_count").integer(spec.part_count).raw(", ");
  w.key("topology").string(spec.topology == Topology::chain ? "chain" : "star").raw(", ");
  w.key("segment_length").number(spec.segment_length).raw(", ");
  w.key("radius").number(spec.radius).raw(", ");
  w.key("vertices_per_segment").integer(spec.vertices_per_segment).raw(", ");
  w.key("pose_count").integer(spec.pose_count).raw(", ");
  w.key("angle_span").number(spec.angle_span).raw(", ");
  w.key("noise_sigma").number(spec.noise_sigma).raw(", ");
  w.key("noise_relative").raw(spec.noise_relative ? "true" : "false").raw(", ");
  w.key("seed").integer(spec.seed).raw("}\n}\n");
  return w.take();
}

GroundTruth ground_truth_from_json(const std::string& text, SynthSpec* spec) {
  const json doc = parse_json(text, "ground truth");
  expect_keys(doc, {"parts", "joints", "boundary_vertices", "spec"}, "ground truth");
  GroundTruth truth;
  read_parts(doc["parts"], truth.labeling, truth.transforms, std::nullopt);
  const json& joints = doc["joints"];
  if (!joints.is_array()) json_error("joints", "expected an array");
  for (std::size_t k = 0; k < joints.size(); ++k) {
    const std::string where = "joints[" + std::to_string(k) + "]";
    expect_keys(joints[k], {"parts", "position", "axis"}, where);
    truth.joints.push_back({get_pair(joints[k]["parts"], truth.labeling.part_count, where),
                            get_vec3(joints[k]["position"], where), get_vec3(joints[k]["axis"], where)});
  }
  const json& band = doc["boundary_vertices"];
  if (!band.is_array()) json_error("boundary_vertices", "expected an array");
  for (const auto& v : band) {
    const auto j = get_unsigned(v, "boundary_vertices");
    if (j >= truth.labeling.vertex_count()) json_error("boundary_vertices", "vertex out of range");
    truth.boundary_vertices.push_back(static_cast<VertexId>(j));
  }
  const json& s = doc["spec"];
  expect_keys(s,
              {"part_count", "topology", "segment_length", "radius", "vertices_per_segment", "pose_count",
               "angle_span", "noise_sigma", "noise_relative", "seed"},
              "spec");
  SynthSpec parsed;
  parsed.part_count = get_unsigned(s["part_count"], "spec.part_count");
  const std::string topology = get_string(s["topology"], "spec.topology");
  if (topology == "chain") parsed.topology = Topology::chain;
  else if (topology == "star") parsed.topology = Topology::star;
  else json_error("spec.topology", "expected chain or star");
  parsed.segment_length = get_number(s["segment_length"], "spec.segment_length");
  parsed.radius = get_number(s["radius"], "spec.radius");
  parsed.vertices_per_segment = get_unsigned(s["vertices_per_segment"], "spec.vertices_per_segment");
  parsed.pose_count = get_unsigned(s["pose_count"], "spec.pose_count");
  parsed.angle_span = get_number(s["angle_span"], "spec.angle_span");
  parsed.noise_sigma = get_number(s["noise_sigma"], "spec.noise_sigma");
  parsed.noise_relative = get_bool(s["noise_relative"], "spec.noise_relative");
  parsed.seed = get_unsigned(s["seed"], "spec.seed");
  if (parsed.part_count != truth.labeling.part_count)
    json_error("spec.part_count", "does not match the parts array");
  if (spec) *spec = parsed;
  return truth;
}

GroundTruth read_ground_truth(const fs::path& path, SynthSpec* spec) {
  try {
    return ground_truth_from_json(read_file(path), spec);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string trace_to_csv(const EMTrace& trace) {
  std::string out = "iteration,delta,objective,part_count,was_integral\n";
  for (const EMRecord& r : trace.records) {
    out += std::to_string(r.iteration) + "," + format_double(r.delta) + "," +
           format_double(r.objective_after_m) + "," + std::to_string(r.part_count) + "," +
           (r.was_integral ? "1" : "0") + "\n";
  }
  return out;
}

void export_model(const ModelFile& model, const Mesh& template_mesh, const EMTrace& trace,
                  const ExportOptions& options) {
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw IoError("cannot create " + options.out_dir.string() + ": " + ec.message());
  write_file_atomic(options.out_dir / "model.json", model_to_json(model));
  if (options.colored_mesh) {
    std::vector<Color> colors;
    for (PartId l : model.labeling.labels) colors.push_back(part_color(l));
    write_ply(options.out_dir / "colored.ply", template_mesh.points(), template_mesh.triangles(),
              PlyEncoding::binary, &colors);
  }
  if (options.trace_csv) write_file_atomic(options.out_dir / "trace.csv", trace_to_csv(trace));
}

}  // namespace artic
