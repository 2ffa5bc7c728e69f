def remove_first_last(s, ch):
    first = s.find(ch)
    if first == -1:
        return s
    s = s[:first] + s[first + 1:]
    last = s.rfind(ch)
    if last == -1:
        return s
    return s[:last] + s[last + 1:]


def sort_matrix(m):
    return sorted(m, key=sum)


def count_common(words):
    counts = {}
    for word in words:
        counts[word] = counts.get(word, 0) + 1
    result = sorted(counts.items(), key=lambda x: x[1], reverse=True)
    return result[:4]


def find_volume(l, b, h):
    return (l * b * h) / 2


def split_lowerstring(text):
    result = []
    for i in range(len(text)):
        if text[i].islower():
            result.append(text[i:])
    return result


def text_lowercase_underscore(text):
    parts = text.split("_")
    if len(parts) != 2:
        return False
    return parts[0].islower() and parts[1].islower()


def square_perimeter(a):
    return 4 * a


def remove_dirty_chars(string, second):
    result = []
    for ch in string:
        if ch not in second:
            result.append(ch)
    return "".join(result)


def test_duplicate(nums):
    seen = set()
    for x in nums:
        if x in seen:
            return True
        seen.add(x)
    return False


def is_woodall(x):
    if x % 2 == 0:
        return False
    if x == 1:
        return True
    x = x + 1
    p = 0
    while x % 2 == 0:
        x = x // 2
        p = p + 1
        if p == x:
            return True
    return False


def multiples_of_num(m, n):
    result = []
    for i in range(1, m + 1):
        result.append(i * n)
    return result


def find_first_duplicate(nums):
    seen = set()
    for x in nums:
        if x in seen:
            return x
        seen.add(x)
    return -1


def maximum_sum(lists):
    best = 0
    for row in lists:
        total = 0
        for x in row:
            total = total + x
        if total > best:
            best = total
    return best


def binary_to_decimal(binary):
    result = 0
    for i in range(len(binary)):
        result = result * 2 + int(binary[i])
    return result


def find_product(arr):
    result = 1
    for x in arr:
        if arr.count(x) == 1:
            result = result * x
    return result


def check_k_elements(test_list, k):
    for row in test_list:
        for x in row:
            if x != k:
                return False
    return True


def remove_digits(words):
    result = []
    for word in words:
        clean = ""
        for ch in word:
            if not ch.isdigit():
                clean = clean + ch
        result.append(clean)
    return result


def binomial_coeff(n, k):
    if k > n:
        return 0
    if k == 0 or k == n:
        return 1
    return binomial_coeff(n - 1, k - 1) + binomial_coeff(n - 1, k)


def get_odd_occurrence(arr):
    for i in range(len(arr)):
        count = 0
        for j in range(len(arr)):
            if arr[i] == arr[j]:
                count = count + 1
        if count % 2 != 0:
            return arr[i]
    return -1


def count_substring_with_equal_ends(s):
    result = 0
    for i in range(len(s)):
        for j in range(i, len(s)):
            if s[i] == s[j]:
                result = result + 1
    return result


def max_prime_factors(n):
    result = -1
    while n % 2 == 0:
        result = 2
        n = n // 2
    i = 3
    while i * i <= n:
        while n % i == 0:
            result = i
            n = n // i
        i = i + 2
    if n > 2:
        result = n
    return result


def decimal_to_binary(n):
    if n == 0:
        return "0"
    result = ""
    while n > 0:
        result = str(n % 2) + result
        n = n // 2
    return result


def find_missing(arr, n):
    for i in range(len(arr)):
        if arr[i] != i + 1:
            return i + 1
    return n


def find_rect_num(n):
    return n * (n + 1)


def find_nth_digit(p, q, n):
    result = 0
    while n > 0:
        n = n - 1
        p = p * 10
        result = p // q
        p = p % q
    return result


def sort_mixed_list(items):
    ints = sorted([x for x in items if isinstance(x, int)])
    strs = sorted([x for x in items if isinstance(x, str)])
    return ints + strs


def div_even_odd(nums):
    first_even = -1
    first_odd = -1
    for x in nums:
        if x % 2 == 0 and first_even == -1:
            first_even = x
        if x % 2 != 0 and first_odd == -1:
            first_odd = x
    return first_even / first_odd


def freq_element(nums):
    counts = {}
    for row in nums:
        for x in row:
            counts[x] = counts.get(x, 0) + 1
    return counts


def filter_evennumbers(nums):
    return [x for x in nums if x % 2 == 0]


def find_sum(arr):
    result = 0
    for x in arr:
        if arr.count(x) > 1:
            result = result + x
    return result


def text_match(text):
    if "_" in text and text.islower():
        return "Found a match!"
    return "Not matched!"


def get_gcd(nums):
    result = nums[0]
    for x in nums[1:]:
        a = result
        b = x
        while b != 0:
            a, b = b, a % b
        result = a
    return result


def test_distinct(data):
    if len(data) == len(set(data)):
        return True
    return False


def compute_last_digit(a, b):
    result = 1
    for i in range(a + 1, b + 1):
        result = (result * (i % 10)) % 10
    return result % 10


def odd_bit_set_number(n):
    count = 0
    result = 0
    temp = n
    while temp > 0:
        if count % 2 == 0:
            result = result | (1 << count)
        count = count + 1
        temp = temp >> 1
    return n | result


def specified_element(nums, n):
    result = []
    for row in nums:
        result.append(row[n])
    return result


def min_length_list(lists):
    best = lists[0]
    for row in lists:
        if len(row) < len(best):
            best = row
    return (len(best), best)


def check_equilateral(x, y, z):
    if x == y and y == z:
        return True
    return False


def parallelogram_area(b, h):
    return b * h


def check_equality(s):
    if s[0] == s[-1]:
        return "Equal"
    return "Not Equal"


def counting_sort(nums):
    top = max(nums)
    counts = [0] * (top + 1)
    for x in nums:
        counts[x] = counts[x] + 1
    result = []
    for i in range(len(counts)):
        for j in range(counts[i]):
            result.append(i)
    return result


def tn_gp(a, n, r):
    return a * (r ** (n - 1))


def rev(num):
    result = 0
    while num > 0:
        result = result * 10 + num % 10
        num = num // 10
    return result


def find_max_num(nums):
    nums = sorted(nums, reverse=True)
    result = 0
    for x in nums:
        result = result * 10 + x
    return result


def is_octagonal(n):
    return 3 * n * n - 2 * n


def max_len_sub(arr):
    best = 1
    current = 1
    for i in range(1, len(arr)):
        if abs(arr[i] - arr[i - 1]) == 1:
            current = current + 1
        else:
            current = 1
        if current > best:
            best = current
    return best


def count_substrings(s):
    result = 0
    for i in range(len(s)):
        total = 0
        for j in range(i, len(s)):
            total = total + int(s[j])
            if total == j - i + 1:
                result = result + 1
    return result


def smallest_num(nums):
    result = nums[0]
    for x in nums:
        if x < result:
            result = x
    return result


def max_difference(pairs):
    best = 0
    for a, b in pairs:
        if abs(a - b) > best:
            best = abs(a - b)
    return best


def three_max(l):
    result = []
    for i in range(len(l)):
        result.append(l[i])
    result = sorted(result, reverse=True)
    return result[:3]
