#include "oralnet/spectral.hpp"

namespace oralnet {

// CIE 015:2004 tables, 5 nm from 380 to 780 nm.
// Columns: CIE 1931 2 degree observer xbar, ybar, zbar; relative SPD of illuminant D65.
namespace {

constexpr double kCie[kCieSamples][4] = {
    {0.001368, 3.9e-05, 0.00645, 49.9755},  // 380 nm
    {0.002236, 6.4e-05, 0.01055, 52.3118},  // 385 nm
    {0.004243, 0.00012, 0.02005, 54.6482},  // 390 nm
    {0.00765, 0.000217, 0.03621, 68.7015},  // 395 nm
    {0.01431, 0.000396, 0.06785, 82.7549},  // 400 nm
    {0.02319, 0.00064, 0.1102, 87.1204},  // 405 nm
    {0.04351, 0.00121, 0.2074, 91.486},  // 410 nm
    {0.07763, 0.00218, 0.3713, 92.4589},  // 415 nm
    {0.13438, 0.004, 0.6456, 93.4318},  // 420 nm
    {0.21477, 0.0073, 1.03905, 90.057},  // 425 nm
    {0.2839, 0.0116, 1.3856, 86.6823},  // 430 nm
    {0.3285, 0.01684, 1.62296, 95.7736},  // 435 nm
    {0.34828, 0.023, 1.74706, 104.865},  // 440 nm
    {0.34806, 0.0298, 1.7826, 110.936},  // 445 nm
    {0.3362, 0.038, 1.77211, 117.008},  // 450 nm
    {0.3187, 0.048, 1.7441, 117.41},  // 455 nm
    {0.2908, 0.06, 1.6692, 117.812},  // 460 nm
    {0.2511, 0.0739, 1.5281, 116.336},  // 465 nm
    {0.19536, 0.09098, 1.28764, 114.861},  // 470 nm
    {0.1421, 0.1126, 1.0419, 115.392},  // 475 nm
    {0.09564, 0.13902, 0.81295, 115.923},  // 480 nm
    {0.05795, 0.1693, 0.6162, 112.367},  // 485 nm
    {0.03201, 0.20802, 0.46518, 108.811},  // 490 nm
    {0.0147, 0.2586, 0.3533, 109.082},  // 495 nm
    {0.0049, 0.323, 0.272, 109.354},  // 500 nm
    {0.0024, 0.4073, 0.2123, 108.578},  // 505 nm
    {0.0093, 0.503, 0.1582, 107.802},  // 510 nm
    {0.0291, 0.6082, 0.1117, 106.296},  // 515 nm
    {0.06327, 0.71, 0.07825, 104.79},  // 520 nm
    {0.1096, 0.7932, 0.05725, 106.239},  // 525 nm
    {0.1655, 0.862, 0.04216, 107.689},  // 530 nm
    {0.22575, 0.91485, 0.02984, 106.047},  // 535 nm
    {0.2904, 0.954, 0.0203, 104.405},  // 540 nm
    {0.3597, 0.9803, 0.0134, 104.225},  // 545 nm
    {0.43345, 0.99495, 0.00875, 104.046},  // 550 nm
    {0.51205, 1, 0.00575, 102.023},  // 555 nm
    {0.5945, 0.995, 0.0039, 100},  // 560 nm
    {0.6784, 0.9786, 0.00275, 98.1671},  // 565 nm
    {0.7621, 0.952, 0.0021, 96.3342},  // 570 nm
    {0.8425, 0.9154, 0.0018, 96.0611},  // 575 nm
    {0.9163, 0.87, 0.00165, 95.788},  // 580 nm
    {0.9786, 0.8163, 0.0014, 92.2368},  // 585 nm
    {1.0263, 0.757, 0.0011, 88.6856},  // 590 nm
    {1.0567, 0.6949, 0.001, 89.3459},  // 595 nm
    {1.0622, 0.631, 0.0008, 90.0062},  // 600 nm
    {1.0456, 0.5668, 0.0006, 89.8026},  // 605 nm
    {1.0026, 0.503, 0.00034, 89.5991},  // 610 nm
    {0.9384, 0.4412, 0.00024, 88.6489},  // 615 nm
    {0.85445, 0.381, 0.00019, 87.6987},  // 620 nm
    {0.7514, 0.321, 0.0001, 85.4936},  // 625 nm
    {0.6424, 0.265, 5e-05, 83.2886},  // 630 nm
    {0.5419, 0.217, 3e-05, 83.4939},  // 635 nm
    {0.4479, 0.175, 2e-05, 83.6992},  // 640 nm
    {0.3608, 0.1382, 1e-05, 81.863},  // 645 nm
    {0.2835, 0.107, 0, 80.0268},  // 650 nm
    {0.2187, 0.0816, 0, 80.1207},  // 655 nm
    {0.1649, 0.061, 0, 80.2146},  // 660 nm
    {0.1212, 0.04458, 0, 81.2462},  // 665 nm
    {0.0874, 0.032, 0, 82.2778},  // 670 nm
    {0.0636, 0.0232, 0, 80.281},  // 675 nm
    {0.04677, 0.017, 0, 78.2842},  // 680 nm
    {0.0329, 0.01192, 0, 74.0027},  // 685 nm
    {0.0227, 0.00821, 0, 69.7213},  // 690 nm
    {0.01584, 0.005723, 0, 70.6652},  // 695 nm
    {0.0113592, 0.004102, 0, 71.6091},  // 700 nm
    {0.00811092, 0.002929, 0, 72.979},  // 705 nm
    {0.00579035, 0.002091, 0, 74.349},  // 710 nm
    {0.00410946, 0.001484, 0, 67.9765},  // 715 nm
    {0.00289933, 0.001047, 0, 61.604},  // 720 nm
    {0.00204919, 0.00074, 0, 65.7448},  // 725 nm
    {0.00143997, 0.00052, 0, 69.8856},  // 730 nm
    {0.000999949, 0.0003611, 0, 72.4863},  // 735 nm
    {0.000690079, 0.0002492, 0, 75.087},  // 740 nm
    {0.000476021, 0.0001719, 0, 69.3398},  // 745 nm
    {0.000332301, 0.00012, 0, 63.5927},  // 750 nm
    {0.000234826, 8.48e-05, 0, 55.0054},  // 755 nm
    {0.00016615, 6e-05, 0, 46.4182},  // 760 nm
    {0.000117413, 4.24e-05, 0, 56.6118},  // 765 nm
    {8.30753e-05, 3e-05, 0, 66.8054},  // 770 nm
    {5.87065e-05, 2.12e-05, 0, 65.0941},  // 775 nm
    {4.15099e-05, 1.499e-05, 0, 63.3828},  // 780 nm
};

}  // namespace

ColorimetricTables cie1931_tables(Illuminant illuminant) {
    ColorimetricTables t;
    for (std::size_t i = 0; i < kCieSamples; ++i) {
        t.wavelengths[i] = kCieStartNm + kCieStepNm * static_cast<double>(i);
        t.xbar[i] = kCie[i][0];
        t.ybar[i] = kCie[i][1];
        t.zbar[i] = kCie[i][2];
        t.illuminant[i] = illuminant == Illuminant::d65 ? kCie[i][3] : 100.0;
    }
    return t;
}

}  // namespace oralnet
