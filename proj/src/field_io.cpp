#include "orliczfb/field_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "orliczfb/numerics.hpp"

namespace orliczfb {

void write_field(std::ostream& out, const Field& u) {
    const Grid& g = u.grid();
    out << "ORLICZFB 1\n" << std::setprecision(17);
    out << "grid " << g.nx() << ' ' << g.ny() << ' ' << g.hx() << ' ' << (g.one_dimensional() ? 0.0 : g.hy()) << '\n';
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            if (i) out << ' ';
            out << u[g.index(i, j)];
        }
        out << '\n';
    }
}

void write_field(const std::string& path, const Field& u) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write field file: " + path);
    write_field(out, u);
    if (!out) throw DomainError("failed writing field file: " + path);
}

Field read_field(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("ORLICZFB 1", 0) != 0) {
        throw DomainError("field file: missing 'ORLICZFB 1' header");
    }
    if (!std::getline(in, line)) throw DomainError("field file: missing grid line");
    std::istringstream gl(line);
    std::string tag;
    int nx = 0, ny = 0;
    double hx = 0.0, hy = 0.0;
    if (!(gl >> tag >> nx >> ny >> hx >> hy) || tag != "grid") throw DomainError("field file: bad grid line");
    if (nx < 2 || ny < 1 || !(hx > 0.0) || (ny > 1 && !(hy > 0.0))) {
        throw DomainError("field file: invalid grid dimensions");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(nx) * ny);
    std::string token;
    while (in >> token) {
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw DomainError("field file: not a number: " + token);
        }
        if (!std::isfinite(v) || v < 0.0) {
            throw DomainError("field file: value " + token + " violates u >= 0");
        }
        values.push_back(v);
    }
    if (values.size() != static_cast<std::size_t>(nx) * ny) {
        throw DomainError("field file: expected " + std::to_string(static_cast<long>(nx) * ny) + " values, found " +
                          std::to_string(values.size()));
    }
    const Grid base = Grid::rectangle(nx, ny, (nx - 1) * hx, ny > 1 ? (ny - 1) * hy : 0.0);
    auto grid = std::make_shared<const Grid>(base.with_dirichlet_values(values));
    return Field(grid, std::move(values));
}

Field read_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open field file: " + path);
    return read_field(in);
}

}  // namespace orliczfb
