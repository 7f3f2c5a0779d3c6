#pragma once

#include "bifmap/errors.hpp"
#include "bifmap/mesh.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace bifmap {

enum class MeshFormat { OFF, PLY };

namespace detail {

inline std::string lowercase(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

/// Reads the next line that is neither blank nor a `#` comment.
inline bool next_content_line(std::istream& in, std::string& line)
{
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
}

inline std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---- PLY ----------------------------------------------------------------

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline PlyType parse_ply_type(const std::string& name)
{
    if (name == "char" || name == "int8") return PlyType::Int8;
    if (name == "uchar" || name == "uint8") return PlyType::UInt8;
    if (name == "short" || name == "int16") return PlyType::Int16;
    if (name == "ushort" || name == "uint16") return PlyType::UInt16;
    if (name == "int" || name == "int32") return PlyType::Int32;
    if (name == "uint" || name == "uint32") return PlyType::UInt32;
    if (name == "float" || name == "float32") return PlyType::Float32;
    if (name == "double" || name == "float64") return PlyType::Float64;
    throw ParseError("PLY: unknown property type '" + name + "'");
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float32;
    bool is_list = false;
    PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

template <typename T>
T read_le(std::istream& in)
{
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
    if (!in) throw ParseError("PLY: unexpected end of binary data");
    // Little-endian host assumed for the reinterpretation below.
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline double read_binary_scalar(std::istream& in, PlyType t)
{
    switch (t) {
    case PlyType::Int8: return read_le<std::int8_t>(in);
    case PlyType::UInt8: return read_le<std::uint8_t>(in);
    case PlyType::Int16: return read_le<std::int16_t>(in);
    case PlyType::UInt16: return read_le<std::uint16_t>(in);
    case PlyType::Int32: return read_le<std::int32_t>(in);
    case PlyType::UInt32: return read_le<std::uint32_t>(in);
    case PlyType::Float32: return read_le<float>(in);
    case PlyType::Float64: return read_le<double>(in);
    }
    throw ParseError("PLY: bad type");
}

/// Pulls whitespace separated tokens across lines for ASCII PLY bodies.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    double next()
    {
        std::string tok;
        if (!(in_ >> tok)) throw ParseError("PLY: unexpected end of ASCII data");
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw ParseError("PLY: bad number '" + tok + "'");
            return v;
        } catch (const std::logic_error&) {
            throw ParseError("PLY: bad number '" + tok + "'");
        }
    }

private:
    std::istream& in_;
};

inline TriangleMesh read_ply(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply") throw ParseError("PLY: missing 'ply' magic");

    bool binary = false;
    bool have_format = false;
    std::vector<PlyElement> elements;
    while (true) {
        if (!std::getline(in, line)) throw ParseError("PLY: header not terminated");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
        if (kw == "end_header") break;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else throw ParseError("PLY: unsupported format '" + fmt + "'");
            have_format = true;
        } else if (kw == "element") {
            PlyElement e;
            if (!(ls >> e.name >> e.count)) throw ParseError("PLY: malformed element line");
            elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (elements.empty()) throw ParseError("PLY: property before element");
            PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                std::string ct, it;
                if (!(ls >> ct >> it >> p.name)) throw ParseError("PLY: malformed list property");
                p.is_list = true;
                p.count_type = parse_ply_type(ct);
                p.type = parse_ply_type(it);
            } else {
                p.type = parse_ply_type(t);
                if (!(ls >> p.name)) throw ParseError("PLY: malformed property");
            }
            elements.back().properties.push_back(std::move(p));
        } else {
            throw ParseError("PLY: unexpected header keyword '" + kw + "'");
        }
    }
    if (!have_format) throw ParseError("PLY: missing format line");

    VertexMatrix vertices;
    FaceMatrix faces;
    bool have_vertices = false;
    bool have_faces = false;
    TokenReader tokens(in);
    auto scalar = [&](PlyType t) { return binary ? read_binary_scalar(in, t) : tokens.next(); };

    for (const auto& e : elements) {
        const bool is_vertex = e.name == "vertex";
        const bool is_face = e.name == "face";
        std::array<int, 3> xyz = {-1, -1, -1};
        int list_prop = -1;
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
            const auto& prop = e.properties[p];
            if (is_vertex && !prop.is_list) {
                if (prop.name == "x") xyz[0] = static_cast<int>(p);
                if (prop.name == "y") xyz[1] = static_cast<int>(p);
                if (prop.name == "z") xyz[2] = static_cast<int>(p);
            }
            if (is_face && prop.is_list && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
                list_prop = static_cast<int>(p);
            }
        }
        if (is_vertex) {
            if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0) throw ParseError("PLY: vertex element lacks x/y/z");
            vertices.resize(static_cast<Index>(e.count), 3);
            have_vertices = true;
        }
        if (is_face) {
            if (list_prop < 0) throw ParseError("PLY: face element lacks vertex_indices");
            faces.resize(static_cast<Index>(e.count), 3);
            have_faces = true;
        }
        for (std::size_t r = 0; r < e.count; ++r) {
            for (std::size_t p = 0; p < e.properties.size(); ++p) {
                const auto& prop = e.properties[p];
                if (prop.is_list) {
                    const double cnt = scalar(prop.count_type);
                    if (cnt < 0) throw ParseError("PLY: negative list length");
                    const auto len = static_cast<std::size_t>(cnt);
                    if (is_face && static_cast<int>(p) == list_prop && len != 3) {
                        throw ParseError("PLY: only triangular faces are supported");
                    }
                    for (std::size_t q = 0; q < len; ++q) {
                        const double v = scalar(prop.type);
                        if (is_face && static_cast<int>(p) == list_prop) {
                            faces(static_cast<Index>(r), static_cast<Index>(q)) = static_cast<int>(v);
                        }
                    }
                } else {
                    const double v = scalar(prop.type);
                    if (is_vertex) {
                        for (int c = 0; c < 3; ++c) {
                            if (xyz[static_cast<std::size_t>(c)] == static_cast<int>(p)) {
                                vertices(static_cast<Index>(r), c) = v;
                            }
                        }
                    }
                }
            }
        }
    }
    if (!have_vertices || !have_faces) throw ParseError("PLY: need both vertex and face elements");
    return TriangleMesh(std::move(vertices), std::move(faces));
}

// ---- OFF ----------------------------------------------------------------

inline TriangleMesh read_off(std::istream& in)
{
    std::string line;
    if (!next_content_line(in, line)) throw ParseError("OFF: empty file");
    std::istringstream head(line);
    std::string magic;
    head >> magic;
    if (magic != "OFF") throw ParseError("OFF: missing 'OFF' header");

    long nv = -1, nf = -1, ne = 0;
    if (!(head >> nv >> nf)) {
        if (!next_content_line(in, line)) throw ParseError("OFF: missing counts line");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf)) throw ParseError("OFF: malformed counts line");
        counts >> ne;
    }
    if (nv < 0 || nf < 0) throw ParseError("OFF: negative counts");

    VertexMatrix vertices(nv, 3);
    for (long i = 0; i < nv; ++i) {
        if (!next_content_line(in, line)) throw ParseError("OFF: truncated vertex list");
        std::istringstream vs(line);
        if (!(vs >> vertices(i, 0) >> vertices(i, 1) >> vertices(i, 2))) {
            throw ParseError("OFF: malformed vertex line " + std::to_string(i));
        }
    }
    FaceMatrix faces(nf, 3);
    for (long f = 0; f < nf; ++f) {
        if (!next_content_line(in, line)) throw ParseError("OFF: truncated face list");
        std::istringstream fs(line);
        int count = 0;
        if (!(fs >> count)) throw ParseError("OFF: malformed face line " + std::to_string(f));
        if (count != 3) throw ParseError("OFF: only triangular faces are supported");
        if (!(fs >> faces(f, 0) >> faces(f, 1) >> faces(f, 2))) {
            throw ParseError("OFF: malformed face line " + std::to_string(f));
        }
    }
    return TriangleMesh(std::move(vertices), std::move(faces));
}

} // namespace detail

inline std::optional<MeshFormat> format_from_extension(const std::filesystem::path& path)
{
    const std::string ext = detail::lowercase(path.extension().string());
    if (ext == ".off") return MeshFormat::OFF;
    if (ext == ".ply") return MeshFormat::PLY;
    return std::nullopt;
}

inline TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open mesh file '" + path.string() + "'");
    return format == MeshFormat::OFF ? detail::read_off(in) : detail::read_ply(in);
}

inline TriangleMesh load_mesh(const std::filesystem::path& path)
{
    const auto fmt = format_from_extension(path);
    if (!fmt) throw ParseError("unrecognised mesh extension for '" + path.string() + "' (expected .off or .ply)");
    return load_mesh(path, *fmt);
}

inline void save_off(const TriangleMesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IOError("cannot write '" + path.string() + "'");
    out << "OFF\n" << mesh.n_vertices() << ' ' << mesh.n_faces() << " 0\n";
    for (Index i = 0; i < mesh.n_vertices(); ++i) {
        out << detail::format_double(mesh.vertices()(i, 0)) << ' ' << detail::format_double(mesh.vertices()(i, 1))
            << ' ' << detail::format_double(mesh.vertices()(i, 2)) << '\n';
    }
    for (Index f = 0; f < mesh.n_faces(); ++f) {
        out << "3 " << mesh.faces()(f, 0) << ' ' << mesh.faces()(f, 1) << ' ' << mesh.faces()(f, 2) << '\n';
    }
    if (!out) throw IOError("write failed for '" + path.string() + "'");
}

using VertexColors = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Writes an ASCII PLY, optionally with per-vertex RGB colours.
inline void save_ply(const TriangleMesh& mesh, const std::filesystem::path& path, const VertexColors* colors = nullptr)
{
    if (colors && colors->rows() != mesh.n_vertices()) throw DimensionError("colour count does not match vertices");
    std::ofstream out(path);
    if (!out) throw IOError("cannot write '" + path.string() + "'");
    out << "ply\nformat ascii 1.0\nelement vertex " << mesh.n_vertices() << "\n"
        << "property double x\nproperty double y\nproperty double z\n";
    if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "element face " << mesh.n_faces() << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (Index i = 0; i < mesh.n_vertices(); ++i) {
        out << detail::format_double(mesh.vertices()(i, 0)) << ' ' << detail::format_double(mesh.vertices()(i, 1))
            << ' ' << detail::format_double(mesh.vertices()(i, 2));
        if (colors) {
            out << ' ' << int((*colors)(i, 0)) << ' ' << int((*colors)(i, 1)) << ' ' << int((*colors)(i, 2));
        }
        out << '\n';
    }
    for (Index f = 0; f < mesh.n_faces(); ++f) {
        out << "3 " << mesh.faces()(f, 0) << ' ' << mesh.faces()(f, 1) << ' ' << mesh.faces()(f, 2) << '\n';
    }
    if (!out) throw IOError("write failed for '" + path.string() + "'");
}

// ---- plain-text per-vertex files ------------------------------------------

/// One 0-based vertex index per line (correspondence / ground-truth format).
inline std::vector<int> load_index_list(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IOError("cannot open '" + path.string() + "'");
    std::vector<int> out;
    std::string line;
    while (detail::next_content_line(in, line)) {
        std::istringstream ls(line);
        long v = 0;
        std::string rest;
        if (!(ls >> v) || (ls >> rest) || v < 0) throw ParseError("bad index line in '" + path.string() + "'");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

inline void save_index_list(const std::vector<int>& values, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IOError("cannot write '" + path.string() + "'");
    for (int v : values) out << v << '\n';
    if (!out) throw IOError("write failed for '" + path.string() + "'");
}

/// One float per line (external descriptor format).
inline Eigen::VectorXd load_scalar_field(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IOError("cannot open '" + path.string() + "'");
    std::vector<double> values;
    std::string line;
    while (detail::next_content_line(in, line)) {
        std::istringstream ls(line);
        double v = 0.0;
        std::string rest;
        if (!(ls >> v) || (ls >> rest)) throw ParseError("bad value line in '" + path.string() + "'");
        values.push_back(v);
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

struct LandmarkPair {
    int source;
    int target;
};

/// Lines of the form "src tgt".
inline std::vector<LandmarkPair> load_landmark_pairs(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IOError("cannot open '" + path.string() + "'");
    std::vector<LandmarkPair> out;
    std::string line;
    while (detail::next_content_line(in, line)) {
        std::istringstream ls(line);
        long s = 0, t = 0;
        std::string rest;
        if (!(ls >> s >> t) || (ls >> rest) || s < 0 || t < 0) {
            throw ParseError("bad landmark line in '" + path.string() + "'");
        }
        out.push_back({static_cast<int>(s), static_cast<int>(t)});
    }
    return out;
}

} // namespace bifmap
