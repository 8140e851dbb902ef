#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "meshnets/mesh.hpp"

namespace meshnets {

enum class MeshFormat { Off, Obj, PlyAscii };

namespace detail {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline ParseError parse_error(const std::string& path, int line, const std::string& msg) {
    return ParseError(path + ":" + std::to_string(line) + ": " + msg);
}

// source lines with 1-based numbers, comments handled per format
struct LineReader {
    std::vector<std::string> lines;
    std::string path;
    std::size_t pos = 0;

    explicit LineReader(const std::string& p) : path(p) {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot open " + p);
        std::string l;
        while (std::getline(in, l)) {
            if (!l.empty() && l.back() == '\r') l.pop_back();
            lines.push_back(l);
        }
    }

    // next non-empty line with '#' comments stripped; returns false at EOF
    bool next(std::string& out, int& lineno, char comment = '#') {
        while (pos < lines.size()) {
            std::string l = lines[pos++];
            auto h = l.find(comment);
            if (h != std::string::npos) l.erase(h);
            std::istringstream probe(l);
            std::string tok;
            if (probe >> tok) {
                out = l;
                lineno = static_cast<int>(pos);
                return true;
            }
        }
        return false;
    }
};

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline int parse_face_count_token(const std::string& path, int lineno, long k) {
    if (k != 3)
        throw parse_error(path, lineno,
                          "non-triangular face with " + std::to_string(k) + " vertices");
    return 3;
}

}  // namespace detail

inline TriMesh load_off(const std::string& path) {
    detail::LineReader rd(path);
    std::string line;
    int ln = 0;
    if (!rd.next(line, ln)) throw detail::parse_error(path, 1, "empty file");
    std::istringstream hdr(line);
    std::string magic;
    hdr >> magic;
    if (magic != "OFF") throw detail::parse_error(path, ln, "missing OFF header");
    long nv = -1, nf = -1, ne = -1;
    if (!(hdr >> nv >> nf >> ne)) {
        if (!rd.next(line, ln)) throw detail::parse_error(path, ln, "missing count line");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne))
            throw detail::parse_error(path, ln, "expected 'nv nf ne' counts");
    }
    if (nv < 0 || nf < 0) throw detail::parse_error(path, ln, "negative element count");

    std::vector<Vec3> verts(nv);
    for (long i = 0; i < nv; ++i) {
        if (!rd.next(line, ln)) throw detail::parse_error(path, ln, "unexpected end of vertices");
        std::istringstream ss(line);
        if (!(ss >> verts[i].x >> verts[i].y >> verts[i].z))
            throw detail::parse_error(path, ln, "expected 3 vertex coordinates");
        std::string extra;
        if (ss >> extra) throw detail::parse_error(path, ln, "unexpected tokens after coordinates");
    }
    std::vector<std::array<int, 3>> faces(nf);
    for (long i = 0; i < nf; ++i) {
        if (!rd.next(line, ln)) throw detail::parse_error(path, ln, "unexpected end of faces");
        std::istringstream ss(line);
        long k;
        if (!(ss >> k)) throw detail::parse_error(path, ln, "expected face vertex count");
        detail::parse_face_count_token(path, ln, k);
        if (!(ss >> faces[i][0] >> faces[i][1] >> faces[i][2]))
            throw detail::parse_error(path, ln, "expected 3 vertex indices");
        std::string extra;
        if (ss >> extra) throw detail::parse_error(path, ln, "unexpected tokens after face");
    }
    try {
        return TriMesh::build(std::move(verts), std::move(faces));
    } catch (const std::exception& e) {
        throw detail::ParseError(path + ": " + e.what());
    }
}

inline TriMesh load_obj(const std::string& path) {
    detail::LineReader rd(path);
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> faces;
    std::string line;
    int ln = 0;
    while (rd.next(line, ln)) {
        std::istringstream ss(line);
        std::string rec;
        ss >> rec;
        if (rec == "v") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z))
                throw detail::parse_error(path, ln, "expected 3 vertex coordinates");
            verts.push_back(p);
        } else if (rec == "f") {
            std::vector<long> idx;
            std::string tok;
            while (ss >> tok) {
                // "7", "7/1" and "7//2" forms all name vertex 7
                std::size_t slash = tok.find('/');
                std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                try {
                    idx.push_back(std::stol(head));
                } catch (...) {
                    throw detail::parse_error(path, ln, "bad face index '" + tok + "'");
                }
            }
            detail::parse_face_count_token(path, ln, static_cast<long>(idx.size()));
            std::array<int, 3> f{};
            for (int k = 0; k < 3; ++k) {
                if (idx[k] < 1)
                    throw detail::parse_error(path, ln, "face indices are 1-based");
                f[k] = static_cast<int>(idx[k] - 1);
            }
            faces.push_back(f);
        }
        // other record types (vn, vt, g, ...) are ignored
    }
    try {
        return TriMesh::build(std::move(verts), std::move(faces));
    } catch (const std::exception& e) {
        throw detail::ParseError(path + ": " + e.what());
    }
}

inline TriMesh load_ply(const std::string& path) {
    detail::LineReader rd(path);
    std::string line;
    int ln = 0;
    if (!rd.next(line, ln) || line.substr(0, 3) != "ply")
        throw detail::parse_error(path, ln ? ln : 1, "missing ply header");

    struct Element {
        std::string name;
        long count = 0;
        std::vector<std::string> properties;  // scalar property names, in order
        bool has_index_list = false;
    };
    std::vector<Element> elements;
    bool ascii = false;
    while (true) {
        if (!rd.next(line, ln)) throw detail::parse_error(path, ln, "unterminated header");
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (kw == "comment") continue;
        if (kw == "format") {
            std::string f, ver;
            ss >> f >> ver;
            if (f != "ascii") throw detail::parse_error(path, ln, "only ascii PLY is supported");
            ascii = true;
        } else if (kw == "element") {
            Element e;
            if (!(ss >> e.name >> e.count))
                throw detail::parse_error(path, ln, "bad element declaration");
            elements.push_back(e);
        } else if (kw == "property") {
            if (elements.empty())
                throw detail::parse_error(path, ln, "property before any element");
            std::string type;
            ss >> type;
            if (type == "list") {
                std::string ct, it, name;
                ss >> ct >> it >> name;
                if (name != "vertex_indices" && name != "vertex_index")
                    throw detail::parse_error(path, ln, "unsupported list property '" + name + "'");
                elements.back().has_index_list = true;
            } else {
                std::string name;
                ss >> name;
                elements.back().properties.push_back(name);
            }
        } else if (kw == "end_header") {
            break;
        } else {
            throw detail::parse_error(path, ln, "unexpected header keyword '" + kw + "'");
        }
    }
    if (!ascii) throw detail::parse_error(path, ln, "missing 'format ascii 1.0'");

    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> faces;
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t i = 0; i < el.properties.size(); ++i) {
                if (el.properties[i] == "x") ix = static_cast<int>(i);
                if (el.properties[i] == "y") iy = static_cast<int>(i);
                if (el.properties[i] == "z") iz = static_cast<int>(i);
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw detail::parse_error(path, ln, "vertex element lacks x,y,z properties");
            verts.resize(el.count);
            for (long i = 0; i < el.count; ++i) {
                if (!rd.next(line, ln))
                    throw detail::parse_error(path, ln, "unexpected end of vertex data");
                std::istringstream ss(line);
                std::vector<double> vals(el.properties.size());
                for (auto& v : vals)
                    if (!(ss >> v)) throw detail::parse_error(path, ln, "short vertex record");
                verts[i] = {vals[ix], vals[iy], vals[iz]};
            }
        } else if (el.name == "face") {
            if (!el.has_index_list)
                throw detail::parse_error(path, ln, "face element lacks vertex_indices list");
            faces.resize(el.count);
            for (long i = 0; i < el.count; ++i) {
                if (!rd.next(line, ln))
                    throw detail::parse_error(path, ln, "unexpected end of face data");
                std::istringstream ss(line);
                long k;
                if (!(ss >> k)) throw detail::parse_error(path, ln, "expected index count");
                detail::parse_face_count_token(path, ln, k);
                if (!(ss >> faces[i][0] >> faces[i][1] >> faces[i][2]))
                    throw detail::parse_error(path, ln, "expected 3 vertex indices");
            }
        } else {
            throw detail::parse_error(path, ln, "unsupported element '" + el.name + "'");
        }
    }
    try {
        return TriMesh::build(std::move(verts), std::move(faces));
    } catch (const std::exception& e) {
        throw detail::ParseError(path + ": " + e.what());
    }
}

inline MeshFormat format_from_path(const std::string& path) {
    auto dotpos = path.rfind('.');
    std::string ext = dotpos == std::string::npos ? "" : path.substr(dotpos + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == "off") return MeshFormat::Off;
    if (ext == "obj") return MeshFormat::Obj;
    if (ext == "ply") return MeshFormat::PlyAscii;
    throw std::runtime_error("cannot infer mesh format from '" + path + "'");
}

inline TriMesh load_mesh(const std::string& path, MeshFormat format) {
    switch (format) {
        case MeshFormat::Off: return load_off(path);
        case MeshFormat::Obj: return load_obj(path);
        case MeshFormat::PlyAscii: return load_ply(path);
    }
    throw std::runtime_error("unknown mesh format");
}

inline TriMesh load_mesh(const std::string& path) {
    return load_mesh(path, format_from_path(path));
}

inline void save_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    using detail::fmt_double;
    switch (format) {
        case MeshFormat::Off: {
            out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << ' '
                << mesh.edge_count() << '\n';
            for (const auto& v : mesh.vertices)
                out << fmt_double(v.x) << ' ' << fmt_double(v.y) << ' ' << fmt_double(v.z) << '\n';
            for (const auto& f : mesh.faces)
                out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
            break;
        }
        case MeshFormat::Obj: {
            for (const auto& v : mesh.vertices)
                out << "v " << fmt_double(v.x) << ' ' << fmt_double(v.y) << ' ' << fmt_double(v.z)
                    << '\n';
            for (const auto& f : mesh.faces)
                out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
            break;
        }
        case MeshFormat::PlyAscii: {
            out << "ply\nformat ascii 1.0\n";
            out << "element vertex " << mesh.vertex_count() << '\n';
            out << "property double x\nproperty double y\nproperty double z\n";
            out << "element face " << mesh.face_count() << '\n';
            out << "property list uchar int vertex_indices\nend_header\n";
            for (const auto& v : mesh.vertices)
                out << fmt_double(v.x) << ' ' << fmt_double(v.y) << ' ' << fmt_double(v.z) << '\n';
            for (const auto& f : mesh.faces)
                out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
            break;
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline void save_mesh(const TriMesh& mesh, const std::string& path) {
    save_mesh(mesh, path, format_from_path(path));
}

// Per-edge scalar sidecar, one `v_i v_j value` line per edge.
inline void save_edge_attributes(const std::vector<std::pair<int, int>>& edges,
                                 const std::vector<double>& values, const std::string& path) {
    if (edges.size() != values.size())
        throw std::runtime_error("edge/value count mismatch in edge attribute export");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < edges.size(); ++i)
        out << edges[i].first << ' ' << edges[i].second << ' ' << detail::fmt_double(values[i])
            << '\n';
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::vector<std::pair<std::pair<int, int>, double>> load_edge_attributes(
    const std::string& path) {
    detail::LineReader rd(path);
    std::vector<std::pair<std::pair<int, int>, double>> rows;
    std::string line;
    int ln = 0;
    while (rd.next(line, ln)) {
        std::istringstream ss(line);
        int u, v;
        double val;
        if (!(ss >> u >> v >> val)) throw detail::parse_error(path, ln, "expected 'u v value'");
        rows.push_back({{u, v}, val});
    }
    return rows;
}

}  // namespace meshnets
