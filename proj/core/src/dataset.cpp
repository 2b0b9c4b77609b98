#include "fga/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "fga/image.hpp"
#include "fga/ops.hpp"

namespace fs = std::filesystem;

namespace fga {

void LabeledDataset::push(Tensor image, int label, std::string path) {
    images.push_back(std::move(image));
    labels.push_back(label);
    std::vector<double> row(static_cast<std::size_t>(classes()), 0.0);
    row[static_cast<std::size_t>(label)] = 1.0;
    onehot.push_back(std::move(row));
    paths.push_back(std::move(path));
}

void LabeledDataset::validate() const {
    if (images.empty()) throw ValueError("dataset is empty");
    if (images.size() != labels.size() || images.size() != onehot.size()) {
        throw ValueError("dataset arrays out of sync");
    }
    for (std::size_t i = 0; i < onehot.size(); ++i) {
        double sum = 0.0;
        for (double v : onehot[i]) {
            if (v != 0.0 && v != 1.0) throw ValueError("label row " + std::to_string(i) + " is not one-hot");
            sum += v;
        }
        if (sum != 1.0) throw ValueError("label row " + std::to_string(i) + " is not one-hot");
    }
}

ClassMode class_mode_from(int classes) {
    switch (classes) {
        case 4: return ClassMode::Four;
        case 3: return ClassMode::Three;
        case 2: return ClassMode::Two;
    }
    throw ValueError("class mode must be 4, 3 or 2, got " + std::to_string(classes));
}

namespace {

std::string normalized_folder(const std::string& name) {
    std::string out;
    for (const char c : name) {
        if (c == '_' || c == '-' || c == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

bool is_no_tumor(const std::string& folder) {
    const std::string n = normalized_folder(folder);
    return n == "notumor" || n == "notumour" || n == "nontumor" || n == "nontumour";
}

int decode_threads() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("FGA_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    return static_cast<int>(n);
}

} // namespace

LabeledDataset load_dataset(const std::string& root, int input_h, int input_w, ClassMode mode) {
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);
    std::vector<std::string> folders;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) folders.push_back(entry.path().filename().string());
    }
    std::sort(folders.begin(), folders.end());
    if (folders.size() < 2) {
        throw IoError("dataset root must contain at least 2 class folders, found " + std::to_string(folders.size()));
    }

    // Resolve the class table and the folder -> class index mapping.
    std::vector<std::string> class_names;
    std::vector<std::pair<std::string, int>> folder_class;  // folder name -> class index
    if (mode == ClassMode::Four) {
        class_names = folders;
        for (std::size_t i = 0; i < folders.size(); ++i) folder_class.emplace_back(folders[i], static_cast<int>(i));
    } else {
        std::vector<std::string> tumor_folders;
        std::string no_tumor;
        for (const std::string& f : folders) {
            if (is_no_tumor(f)) {
                if (!no_tumor.empty()) throw ValueError("multiple no-tumor folders: " + no_tumor + ", " + f);
                no_tumor = f;
            } else {
                tumor_folders.push_back(f);
            }
        }
        if (no_tumor.empty()) {
            throw ValueError("class mode " + std::to_string(static_cast<int>(mode)) +
                             " needs a no-tumor folder (notumor / no_tumor / non-tumor)");
        }
        if (mode == ClassMode::Three) {
            class_names = tumor_folders;  // already sorted
            for (std::size_t i = 0; i < tumor_folders.size(); ++i) {
                folder_class.emplace_back(tumor_folders[i], static_cast<int>(i));
            }
        } else {
            class_names = {no_tumor, "tumor"};
            std::sort(class_names.begin(), class_names.end());
            const int no_idx = static_cast<int>(
                std::find(class_names.begin(), class_names.end(), no_tumor) - class_names.begin());
            const int tumor_idx = 1 - no_idx;
            folder_class.emplace_back(no_tumor, no_idx);
            for (const std::string& f : tumor_folders) folder_class.emplace_back(f, tumor_idx);
        }
    }

    // Gather files in deterministic (sorted) order.
    struct Job {
        std::string path;
        int label;
    };
    std::vector<Job> jobs;
    for (const auto& [folder, label] : folder_class) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / folder)) {
            if (entry.is_regular_file()) files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        for (std::string& f : files) jobs.push_back({std::move(f), label});
    }
    std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.path < b.path; });

    // Decode in parallel; assembly order stays fixed by the jobs vector.
    std::vector<Tensor> decoded(jobs.size());
    std::vector<std::uint8_t> failed(jobs.size(), 0);
    std::vector<std::string> messages(jobs.size());
    const int workers = std::min<int>(decode_threads(), static_cast<int>(jobs.size()));
    std::atomic<std::size_t> cursor{0};
    const auto work = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                const ImageU8 img = read_image(jobs[i].path);
                Tensor t = image_to_tensor(img);
                t = resize_values(t, input_h, input_w, ResizeKind::Bicubic);
                for (std::int64_t j = 0; j < t.size(); ++j) t[j] /= 255.0;
                decoded[i] = std::move(t);
            } catch (const std::exception& e) {
                failed[i] = 1;
                messages[i] = e.what();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    LabeledDataset data;
    data.class_names = class_names;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (failed[i]) {
            std::cerr << "warning: skipping " << jobs[i].path << ": " << messages[i] << "\n";
            ++data.skipped;
            continue;
        }
        data.push(std::move(decoded[i]), jobs[i].label, std::move(jobs[i].path));
    }
    if (data.images.empty()) throw IoError("no decodable images under " + root);
    return data;
}

} // namespace fga
