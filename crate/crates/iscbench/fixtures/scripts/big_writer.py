open('big.bin', 'wb').write(b'A' * (10 * 1024 * 1024))
