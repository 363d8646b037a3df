#include "polsplat/ply.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace polsplat {

void save_surfels_ply(const std::string& path, const SurfelCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_surfels_ply: cannot open " + path);
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << cloud.size() << "\n";
    for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "opacity", "scale_0", "scale_1",
                          "rot_0", "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"})
        out << "property float " << p << "\n";
    out << "end_header\n";
    out.precision(9);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d& x = cloud.position[i];
        const Eigen::Vector3d n = surfel_normal(cloud, i);
        const Eigen::Vector2d s = cloud.scale(i);
        const Eigen::Vector4d q = cloud.unit_rotation(i);
        const Eigen::Vector3d& c = cloud.color[i];
        out << x.x() << " " << x.y() << " " << x.z() << " " << n.x() << " " << n.y() << " "
            << n.z() << " " << cloud.opacity(i) << " " << s.x() << " " << s.y() << " " << q[0]
            << " " << q[1] << " " << q[2] << " " << q[3] << " " << c.x() << " " << c.y() << " "
            << c.z() << "\n";
    }
}

SurfelCloud load_surfels_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_surfels_ply: cannot open " + path);
    std::string line;
    size_t count = 0;
    std::vector<std::string> props;
    bool header_done = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "element") {
            std::string what;
            ss >> what >> count;
            if (what != "vertex") throw std::runtime_error("load_surfels_ply: unexpected element");
        } else if (tok == "property") {
            std::string type, name;
            ss >> type >> name;
            props.push_back(name);
        } else if (tok == "end_header") {
            header_done = true;
            break;
        }
    }
    if (!header_done) throw std::runtime_error("load_surfels_ply: truncated header in " + path);

    auto index_of = [&props, &path](const std::string& name) {
        for (size_t i = 0; i < props.size(); ++i)
            if (props[i] == name) return i;
        throw std::runtime_error("load_surfels_ply: missing property " + name + " in " + path);
    };
    const size_t ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
    const size_t io = index_of("opacity");
    const size_t is0 = index_of("scale_0"), is1 = index_of("scale_1");
    const size_t ir0 = index_of("rot_0"), ir1 = index_of("rot_1"), ir2 = index_of("rot_2"),
                 ir3 = index_of("rot_3");
    const size_t ic0 = index_of("f_dc_0"), ic1 = index_of("f_dc_1"), ic2 = index_of("f_dc_2");

    SurfelCloud cloud;
    cloud.resize(count);
    std::vector<double> vals(props.size());
    for (size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("load_surfels_ply: truncated data in " + path);
        std::istringstream ss(line);
        for (double& v : vals)
            if (!(ss >> v)) throw std::runtime_error("load_surfels_ply: bad row in " + path);
        cloud.position[i] = {vals[ix], vals[iy], vals[iz]};
        const double o = std::clamp(vals[io], 1e-6, 1.0 - 1e-6);
        cloud.opacity_logit[i] = logit(o);
        cloud.log_scale[i] = {std::log(std::max(vals[is0], 1e-12)),
                              std::log(std::max(vals[is1], 1e-12))};
        cloud.rotation[i] = Eigen::Vector4d(vals[ir0], vals[ir1], vals[ir2], vals[ir3]).normalized();
        cloud.color[i] = {vals[ic0], vals[ic1], vals[ic2]};
    }
    return cloud;
}

} // namespace polsplat
