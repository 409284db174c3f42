"""Reference values for the metric tests.

Images are integer formulas so the C++ tests can rebuild them exactly.
SSIM and PSNR come from scikit-image; UIQM is computed with scipy/numpy.
Run: python3 tests/oracles/metric_oracles.py
"""
import numpy as np
from scipy import ndimage
from skimage.metrics import structural_similarity, peak_signal_noise_ratio

H, W = 24, 32


def image(kind):
    y, x, c = np.meshgrid(np.arange(H), np.arange(W), np.arange(3), indexing="ij")
    if kind == "P":
        v = (37 * y + 11 * x + 59 * c + 7 * y * x) % 256
    elif kind == "Q":
        v = (13 * y + 29 * x + 101 * c + 3 * x * x) % 256
    elif kind == "N":
        return 0.75 * image("P") + 0.25 * image("S")
    else:
        v = 64 + 2 * y + 3 * x + 20 * c
    return v.astype(np.float64) / 255.0


def uicm(img):
    r, g, b = (255.0 * img[..., k].ravel() for k in range(3))
    out = []
    for ch in (r - g, (r + g) / 2.0 - b):
        s = np.sort(ch)
        k = s.size
        lo, hi = int(np.ceil(0.1 * k)), int(np.floor(0.1 * k))
        mu = s[lo:k - hi].mean()
        out.append((mu, np.mean((s - mu) ** 2)))
    (m1, v1), (m2, v2) = out
    return -0.0268 * np.hypot(m1, m2) + 0.1586 * np.sqrt(v1 + v2)


def eme(p, block=8):
    by, bx = p.shape[0] // block, p.shape[1] // block
    acc = 0.0
    for j in range(by):
        for i in range(bx):
            blk = p[j * block:(j + 1) * block, i * block:(i + 1) * block]
            lo, hi = blk.min(), blk.max()
            if lo > 0 and hi > 0:
                acc += np.log(hi / lo)
    return 2.0 / (bx * by) * acc


def uism(img):
    total = 0.0
    for k, wgt in enumerate((0.299, 0.587, 0.114)):
        p = 255.0 * img[..., k]
        mag = np.hypot(ndimage.sobel(p, axis=0, mode="reflect"), ndimage.sobel(p, axis=1, mode="reflect"))
        if mag.max() > 0:
            mag = mag * 255.0 / mag.max()
        total += wgt * eme(mag * p)
    return total


def uiconm(img, block=8):
    p = 255.0 * img
    by, bx = p.shape[0] // block, p.shape[1] // block
    acc = 0.0
    for j in range(by):
        for i in range(bx):
            blk = p[j * block:(j + 1) * block, i * block:(i + 1) * block, :]
            top, bot = blk.max() - blk.min(), blk.max() + blk.min()
            if top != 0 and bot != 0:
                acc += (top / bot) * np.log(top / bot)
    return -acc / (bx * by)


def uiqm(img):
    return 0.0282 * uicm(img) + 0.2953 * uism(img) + 3.5753 * uiconm(img)


def ssim(a, b):
    return structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                 data_range=1.0, channel_axis=2)


if __name__ == "__main__":
    imgs = {k: image(k) for k in "PQSN"}
    print(f"ssim(P,Q) = {ssim(imgs['P'], imgs['Q']):.15g}")
    print(f"ssim(P,S) = {ssim(imgs['P'], imgs['S']):.15g}")
    print(f"ssim(Q,S) = {ssim(imgs['Q'], imgs['S']):.15g}")
    print(f"ssim(P,N) = {ssim(imgs['P'], imgs['N']):.15g}")
    print(f"psnr(P,N) = {peak_signal_noise_ratio(imgs['N'], imgs['P'], data_range=1.0):.15g}")
    print(f"psnr(P,Q) = {peak_signal_noise_ratio(imgs['Q'], imgs['P'], data_range=1.0):.15g}")
    yy, xx = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
    imgs["checker64"] = np.repeat(((yy + xx) % 2).astype(np.float64)[..., None], 3, axis=2)
    for k, img in imgs.items():
        print(f"{k}: uicm {uicm(img):.15g} uism {uism(img):.15g} uiconm {uiconm(img):.15g} uiqm {uiqm(img):.15g}")
