def runningExample(keySize):
    p, g = genPublic()
    broadcast([p, g])
    k = genPrivate(keySize)
    # modular exponentiation x = g**k % p
    x = 1
    for i in range(keySize - 1, -1, -1):
        x = x**2 % p
        if (k & (1 << i)) == 1:
            x = g*x % p
        else:
            y = g*x % p
    # x is now sensitive, it should not be broadcast
    broadcast([x])
