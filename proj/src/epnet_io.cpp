#include "covlift/epnet.hpp"
#include "covlift/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace covlift {

namespace {

using nlohmann::json;

json mat_json(const Mat& M) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(M.size()));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
    return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

Mat json_mat(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error(ErrorKind::ParseError, "parameter array has wrong size");
    Mat M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) M(i, j2) = data[static_cast<std::size_t>(i * cols + j2)];
    return M;
}

const char* const coupling_names[] = {"W1", "b1", "W2", "b2", "W3", "b3"};
const char* const linear_names[] = {"lower", "upper", "bias"};

json layer_json(const Layer& layer) {
    json j;
    j["kind"] = layer_kind(layer);
    if (const auto* p = std::get_if<ZeroPad>(&layer)) {
        j["in_dim"] = p->in_dim;
        j["added"] = p->added;
        return j;
    }
    const auto params = layer_params(layer);
    const auto* names = std::holds_alternative<Coupling>(layer) ? coupling_names : linear_names;
    if (const auto* c = std::get_if<Coupling>(&layer)) {
        j["dim"] = c->dim;
        j["cond"] = c->cond;
    } else {
        j["dim"] = std::get<InvLinear>(layer).dim();
    }
    for (std::size_t i = 0; i < params.size(); ++i) j["params"][names[i]] = mat_json(*params[i]);
    return j;
}

Layer json_layer(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "zero_pad") return make_zero_pad(j.at("in_dim").get<int>(), j.at("added").get<int>());
    Layer layer;
    const char* const* names = nullptr;
    if (kind == "inv_linear") {
        layer = InvLinear{};
        names = linear_names;
    } else if (kind == "coupling") {
        Coupling c;
        c.dim = j.at("dim").get<int>();
        c.cond = j.at("cond").get<std::vector<int>>();
        for (int i = 0; i < c.dim; ++i)
            if (std::find(c.cond.begin(), c.cond.end(), i) == c.cond.end()) c.free.push_back(i);
        layer = std::move(c);
        names = coupling_names;
    } else {
        throw Error(ErrorKind::ParseError, "unknown layer kind " + kind);
    }
    auto params = layer_params(layer);
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = json_mat(j.at("params").at(names[i]));
    if (const auto* l = std::get_if<InvLinear>(&layer)) {
        const int n = l->dim();
        if (l->lower.rows() != n || l->lower.cols() != n || l->upper.rows() != n || l->upper.cols() != n || l->bias.cols() != 1)
            throw Error(ErrorKind::ParseError, "inv_linear shapes are inconsistent");
        if ((l->upper.diagonal().array() == 0.0).any()) throw Error(ErrorKind::ParseError, "inv_linear has a zero pivot");
    }
    if (const auto* c = std::get_if<Coupling>(&layer)) {
        const auto a = static_cast<Eigen::Index>(c->cond.size()), b = static_cast<Eigen::Index>(c->free.size());
        const auto h = c->W1.rows();
        if (c->W1.cols() != a || c->b1.rows() != h || c->W2.rows() != h || c->W2.cols() != h || c->b2.rows() != h ||
            c->W3.rows() != 2 * b || c->W3.cols() != h || c->b3.rows() != 2 * b || a == 0 || b == 0)
            throw Error(ErrorKind::ParseError, "coupling shapes are inconsistent");
    }
    return layer;
}

} // namespace

std::string network_to_json(const EPNetwork& net) {
    json j;
    j["in_dim"] = net.in_dim();
    j["proj_keep"] = net.proj_keep();
    j["dims"] = net.dims();
    j["E_layers"] = json::array();
    for (const auto& l : net.E_layers()) j["E_layers"].push_back(layer_json(l));
    j["T_layers"] = json::array();
    for (const auto& l : net.T_layers()) j["T_layers"].push_back(layer_json(l));
    return j.dump(1);
}

EPNetwork network_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        std::vector<Layer> E, T;
        for (const auto& l : j.at("E_layers")) E.push_back(json_layer(l));
        for (const auto& l : j.at("T_layers")) T.push_back(json_layer(l));
        EPNetwork net(j.at("in_dim").get<int>(), std::move(E), j.at("proj_keep").get<int>(), std::move(T));
        if (j.contains("dims") && j["dims"].get<std::vector<int>>() != net.dims())
            throw Error(ErrorKind::ParseError, "dims chain does not match the layers");
        return net;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

void write_network(const EPNetwork& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << network_to_json(net) << '\n';
}

EPNetwork read_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return network_from_json(ss.str());
}

void write_loss_csv(const TrainResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << "step,loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < result.loss.size(); ++i) out << i << ',' << result.loss[i] << '\n';
}

} // namespace covlift
