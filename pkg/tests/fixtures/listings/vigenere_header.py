def vigenere_cipher(s: str, k: str):
    alphabet = 'abc
