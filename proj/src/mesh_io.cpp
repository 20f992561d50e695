#include "covlift/errors.hpp"
#include "covlift/simplicial.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace covlift {

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

} // namespace

SimplicialComplex mesh_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    std::vector<Vec> vertices;
    std::vector<Simplex> maximal;
    int dim = 0, ambient = 0;
    try {
        dim = j.at("dim").get<int>();
        ambient = j.at("ambient_dim").get<int>();
        for (const auto& row : j.at("vertices")) {
            const auto coords = row.get<std::vector<double>>();
            if (static_cast<int>(coords.size()) != ambient)
                throw Error(ErrorKind::ParseError, "vertex has wrong number of coordinates");
            vertices.emplace_back(Eigen::Map<const Vec>(coords.data(), static_cast<Eigen::Index>(coords.size())));
        }
        for (const auto& row : j.at("maximal_simplices")) maximal.push_back(row.get<Simplex>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    auto K = SimplicialComplex::build(std::move(vertices), std::move(maximal));
    if (K.dim() != dim) throw Error(ErrorKind::ParseError, "declared dim does not match simplices");
    return K;
}

std::string mesh_to_json_text(const SimplicialComplex& K) {
    std::ostringstream os;
    os << "{\"dim\": " << K.dim() << ", \"ambient_dim\": " << K.ambient_dim() << ",\n \"vertices\": [";
    for (std::size_t i = 0; i < K.vertex_count(); ++i) {
        os << (i ? ",\n  [" : "\n  [");
        const Vec& v = K.vertices()[i];
        for (Eigen::Index c = 0; c < v.size(); ++c) os << (c ? ", " : "") << fmt17(v(c));
        os << "]";
    }
    os << "],\n \"maximal_simplices\": [";
    for (std::size_t i = 0; i < K.maximal_simplices().size(); ++i) {
        os << (i ? ", [" : "[");
        const auto& s = K.maximal(i);
        for (std::size_t c = 0; c < s.size(); ++c) os << (c ? ", " : "") << s[c];
        os << "]";
    }
    os << "]}\n";
    return os.str();
}

SimplicialComplex read_mesh(const std::filesystem::path& path) { return mesh_from_json_text(slurp(path)); }

void write_mesh(const SimplicialComplex& K, const std::filesystem::path& path) { spit(path, mesh_to_json_text(K)); }

void write_obj(const SimplicialComplex& K, const std::filesystem::path& path) {
    if (K.dim() != 2 || K.ambient_dim() != 3)
        throw Error(ErrorKind::DimMismatch, "OBJ export needs a 2-complex in R^3");
    std::ostringstream os;
    for (const auto& v : K.vertices()) os << "v " << fmt17(v(0)) << ' ' << fmt17(v(1)) << ' ' << fmt17(v(2)) << '\n';
    for (const auto& s : K.maximal_simplices()) os << "f " << s[0] + 1 << ' ' << s[1] + 1 << ' ' << s[2] + 1 << '\n';
    spit(path, os.str());
}

} // namespace covlift
