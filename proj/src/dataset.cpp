#include "crackdet/dataset.hpp"

#include <algorithm>

#include "crackdet/image_io.hpp"

namespace crackdet {

Dataset load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoFailure("not a directory: " + dir.string());

    std::vector<std::string> stems;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name.size() > 4 && name.ends_with(".png") && !name.ends_with(".mask.png"))
            stems.push_back(name.substr(0, name.size() - 4));
    }
    std::sort(stems.begin(), stems.end());

    Dataset ds;
    ds.samples.reserve(stems.size());
    for (const std::string& stem : stems) {
        const auto mask_path = dir / (stem + ".mask.png");
        if (!std::filesystem::exists(mask_path))
            throw DataError("missing mask for " + stem + " in " + dir.string());
        Sample s;
        s.id = stem;
        s.image = load_gray(dir / (stem + ".png"));
        s.mask = load_mask(mask_path);
        if (s.image.width != s.mask.width || s.image.height != s.mask.height)
            throw DimensionMismatch("image/mask size differs for " + stem);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace crackdet
