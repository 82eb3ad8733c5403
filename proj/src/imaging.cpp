#include "sgdeblur/imaging.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

#include "sgdeblur/error.hpp"

namespace sgdeblur {

namespace {

float from_byte(unsigned char v) { return 2.0f * (static_cast<float>(v) / 255.0f) - 1.0f; }

unsigned char to_byte(float s) {
  const double v = std::round(255.0 * (static_cast<double>(s) + 1.0) / 2.0);
  return static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
}

Image from_interleaved(const unsigned char* px, int height, int width, int stride_channels, bool gray) {
  if (height < 1 || width < 1) throw InvalidInput("image has zero dimension");
  Image img(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const unsigned char* p = px + (static_cast<std::size_t>(y) * width + x) * stride_channels;
      for (int c = 0; c < Image::kChannels; ++c) img.at(c, y, x) = from_byte(gray ? p[0] : p[c]);
    }
  }
  return img;
}

Image load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DecodeError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw InvalidInput("image has zero dimension: " + path.string());
  }
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return from_interleaved(buffer.data(), static_cast<int>(image.height), static_cast<int>(image.width), 4, false);
}

struct JpegError {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  std::array<char, JMSG_LENGTH_MAX> message{};
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message.data());
  std::longjmp(err->jump, 1);
}

Image load_jpeg(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw IoError("cannot open " + path.string());

  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<unsigned char> buffer;
  int height = 0, width = 0, comps = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError("cannot decode JPEG " + path.string() + ": " + err.message.data());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.num_components != 1) cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  height = static_cast<int>(cinfo.output_height);
  width = static_cast<int>(cinfo.output_width);
  comps = cinfo.output_components;
  buffer.resize(static_cast<std::size_t>(height) * width * comps);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = buffer.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * comps;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_interleaved(buffer.data(), height, width, comps, comps == 1);
}

// Keys cubic convolution kernel with a = -0.5.
double cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

struct AxisWeights {
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

// Output sample i covers input centre (i + 0.5) / scale - 0.5; taps outside the
// image are dropped and the rest renormalised, so constants are preserved.
AxisWeights axis_weights(int in_size, int out_size) {
  const double scale = static_cast<double>(out_size) / in_size;
  const double stretch = std::max(1.0, 1.0 / scale);
  const double support = 2.0 * stretch;
  AxisWeights aw;
  aw.first.resize(out_size);
  aw.weights.resize(out_size);
  for (int i = 0; i < out_size; ++i) {
    const double center = (i + 0.5) / scale;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support)));
    const int hi = std::min(in_size - 1, static_cast<int>(std::ceil(center + support)));
    std::vector<double> w;
    double total = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double v = cubic((j + 0.5 - center) / stretch);
      w.push_back(v);
      total += v;
    }
    for (double& v : w) v /= total;
    aw.first[i] = lo;
    aw.weights[i] = std::move(w);
  }
  return aw;
}

}  // namespace

Image::Image(int height, int width, float fill) {
  if (height < 1 || width < 1) throw InvalidInput("image dimensions must be at least 1x1");
  planes_ = Tensor({kChannels, height, width}, fill);
}

Image::Image(Tensor planes) : planes_(std::move(planes)) {
  if (planes_.rank() != 3 || planes_.dim(0) != kChannels || planes_.dim(1) < 1 || planes_.dim(2) < 1) {
    throw InvalidInput("image tensor must be {3, H, W}, got " + shape_string(planes_.shape()));
  }
}

void Image::clip() {
  for (float& s : planes_.values()) s = std::clamp(s, -1.0f, 1.0f);
}

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::array<unsigned char, 8> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), magic.size());
  const auto got = in.gcount();
  in.close();
  if (got >= 8 && png_sig_cmp(magic.data(), 0, 8) == 0) return load_png(path);
  if (got >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) return load_jpeg(path);
  throw DecodeError("unrecognised image format: " + path.string());
}

void save_image(const Image& img, const std::filesystem::path& path) {
  const int height = img.height(), width = img.width();
  std::vector<unsigned char> buffer(static_cast<std::size_t>(height) * width * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        buffer[(static_cast<std::size_t>(y) * width + x) * 3 + c] = to_byte(img.at(c, y, x));

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + image.message);
  }
}

Image resample(const Image& img, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) throw InvalidInput("resample target dimensions must be >= 1");
  const int in_h = img.height(), in_w = img.width();
  const AxisWeights wx = axis_weights(in_w, target_w);
  const AxisWeights wy = axis_weights(in_h, target_h);

  std::vector<double> horizontal(static_cast<std::size_t>(in_h) * target_w);
  Image out(target_h, target_w);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < in_h; ++y) {
      for (int x = 0; x < target_w; ++x) {
        double acc = 0.0;
        const auto& w = wx.weights[x];
        for (std::size_t t = 0; t < w.size(); ++t) acc += w[t] * img.at(c, y, wx.first[x] + static_cast<int>(t));
        horizontal[static_cast<std::size_t>(y) * target_w + x] = acc;
      }
    }
    for (int y = 0; y < target_h; ++y) {
      const auto& w = wy.weights[y];
      for (int x = 0; x < target_w; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < w.size(); ++t)
          acc += w[t] * horizontal[static_cast<std::size_t>(wy.first[y] + static_cast<int>(t)) * target_w + x];
        out.at(c, y, x) = static_cast<float>(std::clamp(acc, -1.0, 1.0));
      }
    }
  }
  return out;
}

Image resample_nearest(const Image& img, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) throw InvalidInput("resample target dimensions must be >= 1");
  Image out(target_h, target_w);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < target_h; ++y) {
      const int sy = std::min(img.height() - 1, static_cast<int>((y + 0.5) * img.height() / target_h));
      for (int x = 0; x < target_w; ++x) {
        const int sx = std::min(img.width() - 1, static_cast<int>((x + 0.5) * img.width() / target_w));
        out.at(c, y, x) = img.at(c, sy, sx);
      }
    }
  }
  return out;
}

Dims scaled_dims(Dims base, double r, int n) {
  const double f = std::pow(r, n);
  return {static_cast<int>(std::lround(base.height * f)), static_cast<int>(std::lround(base.width * f))};
}

std::vector<Dims> ImagePyramid::dims() const {
  std::vector<Dims> out;
  out.reserve(levels.size());
  for (const Image& l : levels) out.push_back({l.height(), l.width()});
  return out;
}

void validate(const PyramidOptions& opts) {
  if (!(opts.scale_factor > 0.0 && opts.scale_factor < 1.0)) {
    throw InvalidInput("scale_factor must lie in (0, 1), got " + std::to_string(opts.scale_factor));
  }
  if (opts.min_size < 8) throw InvalidInput("min_size must be >= 8");
  if (opts.max_size < opts.min_size) throw InvalidInput("max_size must be >= min_size");
  if (opts.max_scales < 1) throw InvalidInput("max_scales must be >= 1");
}

int pyramid_depth(int min_dim0, const PyramidOptions& opts) {
  int levels = 1;
  while (levels < opts.max_scales &&
         std::lround(min_dim0 * std::pow(opts.scale_factor, levels)) >= opts.min_size) {
    ++levels;
  }
  return levels;
}

ImagePyramid build_pyramid(const Image& img, const PyramidOptions& opts) {
  validate(opts);
  if (std::min(img.height(), img.width()) < opts.min_size) {
    throw InvalidInput("image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                       " is smaller than min_size " + std::to_string(opts.min_size));
  }
  Image finest = img;
  const int longest = std::max(img.height(), img.width());
  if (longest > opts.max_size) {
    const double s = static_cast<double>(opts.max_size) / longest;
    const Dims d = scaled_dims({img.height(), img.width()}, s, 1);
    if (std::min(d.height, d.width) < opts.min_size) {
      throw InvalidInput("image aspect ratio leaves the short side below min_size after limiting to max_size");
    }
    finest = resample(img, d.height, d.width);
  }

  ImagePyramid pyr;
  pyr.scale_factor = opts.scale_factor;
  const Dims base{finest.height(), finest.width()};
  const int levels = pyramid_depth(std::min(base.height, base.width), opts);
  pyr.levels.reserve(levels);
  pyr.levels.push_back(finest);
  for (int n = 1; n < levels; ++n) {
    const Dims d = scaled_dims(base, opts.scale_factor, n);
    pyr.levels.push_back(resample(finest, d.height, d.width));
  }
  return pyr;
}

}  // namespace sgdeblur
