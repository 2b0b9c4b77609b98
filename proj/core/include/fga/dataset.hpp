#pragma once

#include <string>
#include <vector>

#include "fga/tensor.hpp"

namespace fga {

/// Preprocessed images with one-hot labels. Class indices follow the
/// lexicographic order of the source class folders; file order is the
/// sorted path order, so loading is deterministic.
struct LabeledDataset {
    std::vector<Tensor> images;                // each H x W x 3, values in [0,1]
    std::vector<int> labels;                   // class indices
    std::vector<std::vector<double>> onehot;   // one-hot rows matching labels
    std::vector<std::string> class_names;
    std::vector<std::string> paths;
    int skipped = 0;                           // undecodable files

    int classes() const { return static_cast<int>(class_names.size()); }
    std::size_t size() const { return images.size(); }
    void push(Tensor image, int label, std::string path);
    void validate() const;
};

/// Class handling for the 4/3/2-class settings: 3 drops the no-tumor
/// folder, 2 merges the tumor folders into one class.
enum class ClassMode { Four = 4, Three = 3, Two = 2 };

ClassMode class_mode_from(int classes);

/// Loads a directory-per-class tree of PNG / PGM / PPM images: grayscale is
/// replicated to 3 channels, every image is bicubic-resized to
/// input_h x input_w and scaled by 1/255. Undecodable files are skipped and
/// counted. ClassMode::Four keeps the folders as found (works for any
/// folder count >= 2).
LabeledDataset load_dataset(const std::string& root, int input_h, int input_w,
                            ClassMode mode = ClassMode::Four);

} // namespace fga
