#include "bsnn/shd.hpp"

#include <hdf5.h>

#include <utility>

namespace bsnn::shd {

namespace {

// Closes an HDF5 identifier with the matching H5*close call.
class Handle {
  public:
    Handle(hid_t id, herr_t (*close)(hid_t)) : id_(id), close_(close) {}
    ~Handle() {
        if (id_ >= 0) close_(id_);
    }
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    hid_t get() const { return id_; }
    bool valid() const { return id_ >= 0; }

  private:
    hid_t id_;
    herr_t (*close_)(hid_t);
};

void quiet_errors() { H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr); }

[[noreturn]] void fail(const std::filesystem::path& file, const std::string& what) {
    throw DatasetError(file.string() + ": " + what);
}

hsize_t extent(const Handle& dataset, const std::filesystem::path& file, const char* name) {
    Handle space(H5Dget_space(dataset.get()), H5Sclose);
    if (!space.valid() || H5Sget_simple_extent_ndims(space.get()) != 1) {
        fail(file, std::string(name) + " is not one-dimensional");
    }
    hsize_t n = 0;
    H5Sget_simple_extent_dims(space.get(), &n, nullptr);
    return n;
}

template <class T>
std::vector<std::vector<T>> read_ragged(hid_t fid, const char* name, hid_t base,
                                        const std::filesystem::path& file) {
    Handle ds(H5Dopen2(fid, name, H5P_DEFAULT), H5Dclose);
    if (!ds.valid()) fail(file, std::string("missing dataset ") + name);
    const hsize_t n = extent(ds, file, name);
    Handle type(H5Tvlen_create(base), H5Tclose);
    std::vector<hvl_t> raw(n);
    if (n > 0 && H5Dread(ds.get(), type.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0) {
        fail(file, std::string("cannot read ") + name);
    }
    std::vector<std::vector<T>> out(n);
    for (hsize_t i = 0; i < n; ++i) {
        const T* p = static_cast<const T*>(raw[i].p);
        out[i].assign(p, p + raw[i].len);
    }
    if (n > 0) {
        Handle space(H5Dget_space(ds.get()), H5Sclose);
        H5Dvlen_reclaim(type.get(), space.get(), H5P_DEFAULT, raw.data());
    }
    return out;
}

template <class T>
void write_ragged(hid_t loc, const char* name, hid_t file_base, hid_t mem_base,
                  const std::vector<std::vector<T>>& rows, const std::filesystem::path& file) {
    std::vector<hvl_t> raw(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        raw[i].len = rows[i].size();
        raw[i].p = const_cast<T*>(rows[i].data());
    }
    const hsize_t n = rows.size();
    Handle space(H5Screate_simple(1, &n, nullptr), H5Sclose);
    Handle ftype(H5Tvlen_create(file_base), H5Tclose);
    Handle mtype(H5Tvlen_create(mem_base), H5Tclose);
    Handle ds(H5Dcreate2(loc, name, ftype.get(), space.get(), H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT),
              H5Dclose);
    if (!ds.valid() ||
        (n > 0 && H5Dwrite(ds.get(), mtype.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0)) {
        fail(file, std::string("cannot write ") + name);
    }
}

} // namespace

std::vector<RawSample> read_split(const std::filesystem::path& file) {
    quiet_errors();
    if (!std::filesystem::is_regular_file(file)) fail(file, "no such file");
    Handle fid(H5Fopen(file.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!fid.valid()) fail(file, "not a readable HDF5 file");

    Handle labels_ds(H5Dopen2(fid.get(), "/labels", H5P_DEFAULT), H5Dclose);
    if (!labels_ds.valid()) fail(file, "missing dataset /labels");
    const hsize_t n = extent(labels_ds, file, "/labels");
    std::vector<int> labels(n);
    if (n > 0 && H5Dread(labels_ds.get(), H5T_NATIVE_INT, H5S_ALL, H5S_ALL, H5P_DEFAULT,
                         labels.data()) < 0) {
        fail(file, "cannot read /labels");
    }
    auto times = read_ragged<float>(fid.get(), "/spikes/times", H5T_NATIVE_FLOAT, file);
    auto units = read_ragged<std::uint16_t>(fid.get(), "/spikes/units", H5T_NATIVE_UINT16, file);
    if (times.size() != n || units.size() != n) {
        fail(file, "spikes and labels disagree on the sample count");
    }

    std::vector<RawSample> out(n);
    for (hsize_t i = 0; i < n; ++i) {
        out[i].times = std::move(times[i]);
        out[i].units = std::move(units[i]);
        out[i].label = labels[i];
        try {
            out[i].validate();
        } catch (const DatasetError& e) {
            fail(file, "sample " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

void write_split(const std::filesystem::path& file, const std::vector<RawSample>& samples) {
    quiet_errors();
    Handle fid(H5Fcreate(file.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
    if (!fid.valid()) fail(file, "cannot create HDF5 file");
    Handle spikes(H5Gcreate2(fid.get(), "spikes", H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Gclose);

    std::vector<std::vector<float>> times;
    std::vector<std::vector<std::uint16_t>> units;
    std::vector<std::uint16_t> labels;
    for (const auto& s : samples) {
        s.validate();
        times.push_back(s.times);
        units.push_back(s.units);
        labels.push_back(static_cast<std::uint16_t>(s.label));
    }
    write_ragged(spikes.get(), "times", H5T_IEEE_F32LE, H5T_NATIVE_FLOAT, times, file);
    write_ragged(spikes.get(), "units", H5T_STD_U16LE, H5T_NATIVE_UINT16, units, file);

    const hsize_t n = labels.size();
    Handle space(H5Screate_simple(1, &n, nullptr), H5Sclose);
    Handle ds(H5Dcreate2(fid.get(), "labels", H5T_STD_U16LE, space.get(), H5P_DEFAULT, H5P_DEFAULT,
                         H5P_DEFAULT),
              H5Dclose);
    if (!ds.valid() || (n > 0 && H5Dwrite(ds.get(), H5T_NATIVE_UINT16, H5S_ALL, H5S_ALL,
                                          H5P_DEFAULT, labels.data()) < 0)) {
        fail(file, "cannot write labels");
    }
}

} // namespace bsnn::shd
