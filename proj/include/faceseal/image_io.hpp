#pragma once

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "faceseal/tensor.hpp"

namespace faceseal {

// File I/O boundary. Tensors are (3,H,W) RGB in [0,1]; files are whatever
// OpenCV reads/writes (BGR, 8- or 16-bit).

inline Tensor tensor_from_mat(const cv::Mat& m) {
    cv::Mat img;
    if (m.channels() == 1)
        cv::cvtColor(m, img, cv::COLOR_GRAY2BGR);
    else if (m.channels() == 4)
        cv::cvtColor(m, img, cv::COLOR_BGRA2BGR);
    else
        img = m;
    const int h = img.rows, w = img.cols;
    Tensor t({3, h, w});
    const double scale = img.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double b, g, r;
            if (img.depth() == CV_16U) {
                const auto& px = img.at<cv::Vec3w>(y, x);
                b = px[0]; g = px[1]; r = px[2];
            } else {
                const auto& px = img.at<cv::Vec3b>(y, x);
                b = px[0]; g = px[1]; r = px[2];
            }
            t.at3(0, y, x) = float(r * scale);
            t.at3(1, y, x) = float(g * scale);
            t.at3(2, y, x) = float(b * scale);
        }
    return t;
}

inline cv::Mat mat_from_tensor(const Tensor& t, int bits = 8) {
    if (t.ndim() != 3 || t.dim(0) != 3) throw std::invalid_argument("mat_from_tensor: want (3,H,W)");
    const int h = t.dim(1), w = t.dim(2);
    auto clamp01 = [](float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); };
    if (bits == 16) {
        cv::Mat m(h, w, CV_16UC3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                m.at<cv::Vec3w>(y, x) = cv::Vec3w(
                    static_cast<ushort>(std::lround(clamp01(t.at3(2, y, x)) * 65535.0f)),
                    static_cast<ushort>(std::lround(clamp01(t.at3(1, y, x)) * 65535.0f)),
                    static_cast<ushort>(std::lround(clamp01(t.at3(0, y, x)) * 65535.0f)));
        return m;
    }
    cv::Mat m(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at<cv::Vec3b>(y, x) =
                cv::Vec3b(static_cast<uchar>(std::lround(clamp01(t.at3(2, y, x)) * 255.0f)),
                          static_cast<uchar>(std::lround(clamp01(t.at3(1, y, x)) * 255.0f)),
                          static_cast<uchar>(std::lround(clamp01(t.at3(0, y, x)) * 255.0f)));
    return m;
}

inline Tensor imread_tensor(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("cannot read image: " + path);
    return tensor_from_mat(m);
}

// Lossless export; bits = 8 or 16.
inline void imwrite_tensor(const std::string& path, const Tensor& t, int bits = 16) {
    if (bits != 8 && bits != 16) throw std::invalid_argument("imwrite_tensor: bits must be 8 or 16");
    if (!cv::imwrite(path, mat_from_tensor(t, bits)))
        throw std::runtime_error("cannot write image: " + path);
}

// Round trip through a genuine JPEG encoder (libjpeg via OpenCV) at the given
// quality; the transfer check for the differentiable approximation.
inline Tensor jpeg_real_roundtrip(const Tensor& t, int quality) {
    std::vector<uchar> buf;
    cv::imencode(".jpg", mat_from_tensor(t, 8), buf,
                 {cv::IMWRITE_JPEG_QUALITY, quality});
    cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (decoded.empty()) throw std::runtime_error("jpeg round trip failed");
    return tensor_from_mat(decoded);
}

// Center-crop to square then resize to size x size (area interpolation).
inline Tensor ingest_image(const cv::Mat& m, int size, int* crop_x = nullptr,
                           int* crop_y = nullptr, double* scale = nullptr) {
    const int side = std::min(m.rows, m.cols);
    const int x0 = (m.cols - side) / 2, y0 = (m.rows - side) / 2;
    cv::Mat crop = m(cv::Rect(x0, y0, side, side));
    cv::Mat resized;
    cv::resize(crop, resized, cv::Size(size, size), 0, 0,
               side >= size ? cv::INTER_AREA : cv::INTER_LINEAR);
    if (crop_x) *crop_x = x0;
    if (crop_y) *crop_y = y0;
    if (scale) *scale = double(size) / side;
    return tensor_from_mat(resized);
}

}  // namespace faceseal
