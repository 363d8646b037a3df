#include "polsplat/pfm.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace polsplat {

void write_pfm(const std::string& path, const Image& img) {
    if (img.channels() != 1 && img.channels() != 3)
        throw std::runtime_error("write_pfm: image must have 1 or 3 channels: " + path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
    out << (img.channels() == 3 ? "PF" : "Pf") << "\n";
    out << img.width() << " " << img.height() << "\n";
    out << "-1.0" << "\n";
    std::vector<float> row(static_cast<size_t>(img.width()) * img.channels());
    for (int y = img.height() - 1; y >= 0; --y) {
        const double* src = img.row(y);
        for (size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(src[i]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write_pfm: write failed for " + path);
}

Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pfm: cannot open " + path);

    auto next_token = [&in, &path]() {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error("read_pfm: truncated header in " + path);
        return tok;
    };

    const std::string magic = next_token();
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw std::runtime_error("read_pfm: bad magic '" + magic + "' in " + path);

    const int width = std::stoi(next_token());
    const int height = std::stoi(next_token());
    const double scale = std::stod(next_token());
    if (width <= 0 || height <= 0)
        throw std::runtime_error("read_pfm: bad dimensions in " + path);
    if (scale >= 0.0)
        throw std::runtime_error("read_pfm: big-endian PFM not supported: " + path);
    in.get(); // single whitespace after the scale line

    Image img(width, height, channels);
    std::vector<float> row(static_cast<size_t>(width) * channels);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error("read_pfm: truncated pixel data in " + path);
        double* dst = img.row(y);
        for (size_t i = 0; i < row.size(); ++i) dst[i] = row[i];
    }
    return img;
}

} // namespace polsplat
